use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use desmiles::chem::{canonical_smiles, parse_smiles, MolecularGraph};
use desmiles::config::RunConfig;
use desmiles::corpus::{filter_corpus, read_smiles_file, within_token_cap, write_smiles_file};
use desmiles::fingerprint::{input_fingerprint, BitFingerprint};
use desmiles::landscape::{distance_correlation, plane_from_three, sample_grid, Extent, LandscapeError};
use desmiles::net::{load_checkpoint, save_checkpoint, LossBreakdown, ModelParameters, NetError};
use desmiles::recovery::{evaluate_recovery, write_results_jsonl};
use desmiles::search::{build_strategy, ensemble_generate, Candidate, SearchError};
use desmiles::tokenizer::{train_bpe, Vocabulary};
use desmiles::train::{train, StepRecord, TrainError, TrainExample, TrainObserver, LOG_HEADER};
use desmiles::transfer::{
    build_matched_pairs, evaluate_streams, finetune, generate_streams, read_pairs, scorer_by_name, write_pairs,
    TransferError,
};

use crate::{CliError, Command};

fn data<E: std::fmt::Display>(context: &Path) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", context.display()))
}

fn net_error(e: NetError) -> CliError {
    match e {
        NetError::InvalidConfig(m) => CliError::Usage(m),
        other => CliError::Data(other.to_string()),
    }
}

fn search_error(e: SearchError) -> CliError {
    match e {
        SearchError::Net(n) => net_error(n),
        other => CliError::Usage(other.to_string()),
    }
}

fn train_error(e: TrainError) -> CliError {
    match e {
        TrainError::InvalidConfig(m) => CliError::Usage(m),
        other => CliError::Data(other.to_string()),
    }
}

fn transfer_error(e: TransferError) -> CliError {
    match e {
        TransferError::UnknownScorer(..) | TransferError::InvalidConfig(_) => CliError::Usage(e.to_string()),
        TransferError::Search(s) => search_error(s),
        TransferError::Train(t) => train_error(t),
        other => CliError::Data(other.to_string()),
    }
}

fn landscape_error(e: LandscapeError) -> CliError {
    match e {
        LandscapeError::InvalidSetting(m) => CliError::Usage(m),
        LandscapeError::Net(n) => net_error(n),
        other => CliError::Data(other.to_string()),
    }
}

fn vocab_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".vocab.json");
    PathBuf::from(s)
}

fn load_vocab(path: &Path) -> Result<Vocabulary, CliError> {
    Vocabulary::load(path).map_err(data(path))
}

fn load_model(checkpoint: &Path, vocab: Option<&Path>) -> Result<(ModelParameters, Vocabulary), CliError> {
    let vpath = vocab.map(Path::to_path_buf).unwrap_or_else(|| vocab_path(checkpoint));
    let vocab = load_vocab(&vpath)?;
    let params = load_checkpoint(checkpoint, &vocab).map_err(data(checkpoint))?;
    Ok((params, vocab))
}

fn load_models(checkpoints: &[PathBuf], vocab: Option<&Path>) -> Result<(Vec<ModelParameters>, Vocabulary), CliError> {
    let (first, vocab) = load_model(&checkpoints[0], vocab)?;
    let mut models = vec![first];
    for c in &checkpoints[1..] {
        models.push(load_checkpoint(c, &vocab).map_err(data(c))?);
    }
    Ok((models, vocab))
}

/// Writes the model and a copy of its vocabulary next to it.
fn save_model(path: &Path, params: &ModelParameters, vocab: &Vocabulary) -> Result<(), CliError> {
    save_checkpoint(path, params, vocab).map_err(data(path))?;
    let vp = vocab_path(path);
    vocab.save(&vp).map_err(data(&vp))
}

fn parse(smiles: &str) -> Result<MolecularGraph, CliError> {
    parse_smiles(smiles).map_err(|e| CliError::Data(format!("{smiles:?}: {e}")))
}

fn read_corpus(path: &Path) -> Result<Vec<String>, CliError> {
    read_smiles_file(path).map_err(data(path))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(data(path))?))
}

fn print_candidates(cands: &[Candidate]) {
    for (i, c) in cands.iter().enumerate() {
        println!("{}\t{}\t{:.6}", i + 1, c.smiles, c.log_prob);
    }
}

/// Tab-separated step log plus a checkpoint after every epoch.
struct RunLog<'a> {
    log: Option<BufWriter<File>>,
    checkpoint: &'a Path,
    vocab: &'a Vocabulary,
    failed: Option<CliError>,
}

impl<'a> RunLog<'a> {
    fn new(log: Option<&Path>, checkpoint: &'a Path, vocab: &'a Vocabulary) -> Result<RunLog<'a>, CliError> {
        let log = match log {
            Some(p) => {
                let mut w = create(p)?;
                writeln!(w, "{LOG_HEADER}").map_err(data(p))?;
                Some(w)
            }
            None => None,
        };
        Ok(RunLog {
            log,
            checkpoint,
            vocab,
            failed: None,
        })
    }

    fn finish(mut self) -> Result<(), CliError> {
        if let Some(w) = self.log.as_mut() {
            w.flush().map_err(|e| CliError::Data(e.to_string()))?;
        }
        self.failed.map_or(Ok(()), Err)
    }
}

impl TrainObserver for RunLog<'_> {
    fn on_step(&mut self, record: &StepRecord) {
        if let Some(w) = self.log.as_mut() {
            if let Err(e) = writeln!(w, "{}", record.to_tsv()) {
                self.failed.get_or_insert(CliError::Data(e.to_string()));
            }
        }
    }

    fn on_epoch(&mut self, epoch: usize, mean: &LossBreakdown, params: &ModelParameters) {
        log::info!("epoch {epoch}: nll {:.4} ar {:.4} tar {:.4}", mean.nll, mean.ar, mean.tar);
        if let Err(e) = save_model(self.checkpoint, params, self.vocab) {
            self.failed.get_or_insert(e);
        }
    }
}

pub fn run(command: Command, config: &RunConfig) -> Result<(), CliError> {
    match command {
        Command::Filter { input, output } => {
            let lines = read_corpus(&input)?;
            let report = filter_corpus(&lines);
            write_smiles_file(&output, &report.kept).map_err(data(&output))?;
            eprintln!(
                "kept {} of {} (unparsable {}, rejected {}, duplicates {})",
                report.kept.len(),
                lines.len(),
                report.unparsable,
                report.rejected,
                report.duplicates
            );
        }
        Command::BuildVocab { corpus, output, size } => {
            let smiles = read_corpus(&corpus)?;
            let vocab = train_bpe(&smiles, size.unwrap_or(config.vocab.size)).map_err(data(&corpus))?;
            vocab.save(&output).map_err(data(&output))?;
            let (_, frac) = within_token_cap(&vocab, &smiles);
            eprintln!(
                "{} tokens ({} merges{}); {:.2}% of molecules within the token cap",
                vocab.len(),
                vocab.merge_count(),
                if vocab.exhausted() { ", merges exhausted" } else { "" },
                100.0 * frac
            );
        }
        Command::Pretrain {
            corpus,
            vocab,
            output,
            log,
            epochs,
        } => {
            let vocab = load_vocab(&vocab)?;
            let (kept, frac) = within_token_cap(&vocab, &read_corpus(&corpus)?);
            eprintln!("{} molecules within the token cap ({:.2}%)", kept.len(), 100.0 * frac);
            let examples = kept
                .iter()
                .map(|s| TrainExample::new(&vocab, &parse(s)?, s).map_err(train_error))
                .collect::<Result<Vec<_>, _>>()?;
            let mut model = config.model.clone();
            model.vocab_size = vocab.len();
            let mut params = ModelParameters::init(&model, config.seed).map_err(net_error)?;
            let mut tc = config.train.clone();
            tc.seed = config.seed;
            if let Some(e) = epochs {
                tc.epochs = e;
            }
            let mut observer = RunLog::new(log.as_deref(), &output, &vocab)?;
            let report = train(&mut params, &examples, &tc, &mut observer).map_err(train_error)?;
            observer.finish()?;
            save_model(&output, &params, &vocab)?;
            eprintln!("{} steps, {} skipped", report.steps, report.skipped);
        }
        Command::Generate {
            model,
            smiles,
            fingerprint,
            top,
            strategy,
        } => {
            let (params, vocab) = load_model(&model.checkpoint, model.vocab.as_deref())?;
            let fp = match (smiles, fingerprint) {
                (Some(s), _) => input_fingerprint(&parse(&s)?),
                (None, Some(hex)) => {
                    BitFingerprint::from_hex(&hex).map_err(|e| CliError::Data(format!("fingerprint: {e}")))?
                }
                (None, None) => return Err(CliError::Usage("give --smiles or --fingerprint".into())),
            };
            let mut sc = config.search.strategy_config(config.seed);
            if let Some(s) = strategy {
                sc.name = s;
            }
            let strategy = build_strategy(&sc).map_err(search_error)?;
            let cands = strategy.generate(&params, &vocab, &fp, top).map_err(search_error)?;
            print_candidates(&cands);
        }
        Command::Recover { model, corpus, report } => {
            let (params, vocab) = load_model(&model.checkpoint, model.vocab.as_deref())?;
            let graphs = read_corpus(&corpus)?
                .iter()
                .map(|s| parse(s))
                .collect::<Result<Vec<_>, _>>()?;
            let (results, metrics) =
                evaluate_recovery(&params, &vocab, &graphs, config.search.budget()).map_err(net_error)?;
            if let Some(p) = report {
                let mut w = create(&p)?;
                write_results_jsonl(&mut w, &results).map_err(data(&p))?;
                w.flush().map_err(data(&p))?;
            }
            println!("{}", serde_json::to_string_pretty(&metrics).expect("metrics serialize"));
        }
        Command::Pairs { corpus, output, scorer } => {
            let smiles = read_corpus(&corpus)?;
            let scorer = scorer_by_name(scorer.as_deref().unwrap_or(&config.benchmark.scorer)).map_err(transfer_error)?;
            let mut pc = config.pairs.clone();
            pc.seed = config.seed;
            pc.sample_size = pc.sample_size.min(smiles.len());
            let pairs = build_matched_pairs(&smiles, scorer.as_ref(), &pc).map_err(transfer_error)?;
            let mut w = create(&output)?;
            write_pairs(&mut w, &pairs).map_err(data(&output))?;
            w.flush().map_err(data(&output))?;
            eprintln!("{} pairs", pairs.len());
        }
        Command::Finetune {
            model,
            pairs,
            output,
            log,
            freeze,
        } => {
            let (mut params, vocab) = load_model(&model.checkpoint, model.vocab.as_deref())?;
            let file = File::open(&pairs).map_err(data(&pairs))?;
            let pairs = read_pairs(BufReader::new(file)).map_err(transfer_error)?;
            let mut fc = config.finetune.clone();
            fc.seed = config.seed;
            fc.freeze_first_encoder_layer |= freeze;
            let mut observer = RunLog::new(log.as_deref(), &output, &vocab)?;
            finetune(&mut params, &pairs, &vocab, &fc, &mut observer).map_err(transfer_error)?;
            observer.finish()?;
            save_model(&output, &params, &vocab)?;
        }
        Command::Benchmark {
            checkpoint,
            vocab,
            inputs,
            scorer,
            k,
        } => {
            let (models, vocab) = load_models(&checkpoint, vocab.as_deref())?;
            let inputs = read_corpus(&inputs)?;
            let scorer = scorer_by_name(scorer.as_deref().unwrap_or(&config.benchmark.scorer)).map_err(transfer_error)?;
            let ks = if k.is_empty() { config.benchmark.k.clone() } else { k };
            let k_max = ks.iter().copied().max().unwrap_or(0);
            if k_max == 0 {
                return Err(CliError::Usage("--k must list positive cutoffs".into()));
            }
            let streams = if models.len() == 1 {
                let strategy = build_strategy(&config.search.strategy_config(config.seed)).map_err(search_error)?;
                generate_streams(strategy.as_ref(), &models[0], &vocab, &inputs, k_max).map_err(transfer_error)?
            } else {
                let refs: Vec<&ModelParameters> = models.iter().collect();
                inputs
                    .iter()
                    .map(|s| {
                        let fp = input_fingerprint(&parse(s)?);
                        ensemble_generate(&refs, &vocab, &fp, k_max, config.search.budget()).map_err(net_error)
                    })
                    .collect::<Result<Vec<_>, _>>()?
            };
            let mut results = Vec::new();
            for &k in &ks {
                results.push(
                    evaluate_streams(&inputs, &streams, scorer.as_ref(), config.benchmark.sim_threshold, k)
                        .map_err(transfer_error)?,
                );
            }
            println!("{}", serde_json::to_string_pretty(&results).expect("report serializes"));
        }
        Command::Landscape {
            model,
            anchors,
            output,
            resolution,
        } => {
            let (params, vocab) = load_model(&model.checkpoint, model.vocab.as_deref())?;
            let mut emb = Vec::new();
            for a in &anchors {
                emb.push(params.embed(&input_fingerprint(&parse(a)?)).map_err(net_error)?);
            }
            let basis = plane_from_three(emb[0].view(), emb[1].view(), emb[2].view()).map_err(landscape_error)?;
            let ls = &config.landscape;
            let grid = sample_grid(
                &params,
                &vocab,
                &basis,
                resolution.unwrap_or(ls.resolution),
                Extent::around_anchors(&basis, ls.margin),
                ls.top_k,
                config.search.budget(),
            )
            .map_err(landscape_error)?;
            let mut w = create(&output)?;
            grid.write_csv(&mut w).map_err(data(&output))?;
            w.flush().map_err(data(&output))?;
            for (a, (x, y)) in anchors.iter().zip(basis.anchor_coords) {
                eprintln!("anchor {} at ({x:.6}, {y:.6})", canonical_smiles(&parse(a)?));
            }
        }
        Command::Correlate { model, corpus, output } => {
            let (params, _) = load_model(&model.checkpoint, model.vocab.as_deref())?;
            let fps = read_corpus(&corpus)?
                .iter()
                .map(|s| Ok(input_fingerprint(&parse(s)?)))
                .collect::<Result<Vec<_>, CliError>>()?;
            let ls = &config.landscape;
            let report =
                distance_correlation(&params, &fps, ls.bin_width, ls.pairs_per_bin, config.seed).map_err(landscape_error)?;
            match output {
                Some(p) => {
                    let mut w = create(&p)?;
                    serde_json::to_writer_pretty(&mut w, &report).map_err(data(&p))?;
                    w.flush().map_err(data(&p))?;
                }
                None => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
            }
            match report.r {
                Some(r) => eprintln!("pearson r = {r:.4} over {} pairs", report.n_pairs),
                None => eprintln!("pearson r undefined over {} pairs", report.n_pairs),
            }
        }
        Command::EnsembleGenerate {
            checkpoint,
            vocab,
            smiles,
            top,
        } => {
            let (models, vocab) = load_models(&checkpoint, vocab.as_deref())?;
            let refs: Vec<&ModelParameters> = models.iter().collect();
            let fp = input_fingerprint(&parse(&smiles)?);
            let cands = ensemble_generate(&refs, &vocab, &fp, top, config.search.budget()).map_err(net_error)?;
            print_candidates(&cands);
        }
    }
    Ok(())
}
