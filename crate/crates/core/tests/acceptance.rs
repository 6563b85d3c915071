//! One test per acceptance criterion. Each prints a PASS/FAIL line with the
//! measured value before asserting. The desk-scale criteria share one trained
//! model, built once per test run.

use std::collections::HashSet;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use desmiles::chem::{canonical_smiles, parse_smiles, random_smiles, MolecularGraph};
use desmiles::corpus::{filter_corpus, synthetic_corpus, within_token_cap};
use desmiles::fingerprint::{ecfp4, input_fingerprint, tanimoto, BitFingerprint};
use desmiles::landscape::{distance_correlation, plane_from_three, sample_grid, sample_points, Extent};
use desmiles::net::{
    forward_backward, is_first_encoder_layer, Batch, DecoderState, DropoutMasks, ModelConfig, ModelParameters, Weights,
};
use desmiles::recovery::{evaluate_recovery, recover_with, RecoveryResult};
use desmiles::search::{
    ensemble_generate, AStar, BeamStrategy, Candidate, SearchBudget, StateMemory, StrategyConfig,
};
use desmiles::tokenizer::{train_bpe, Vocabulary, END, START};
use desmiles::train::{one_cycle, train, TrainConfig, TrainExample};
use desmiles::transfer::{
    build_matched_pairs, evaluate_streams, finetune, generate_streams, FinetuneConfig, HalogenPresence, PairConfig,
    PropertyScorer,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn report(id: u32, what: &str, pass: bool, detail: String) {
    println!("[{}] criterion {id}: {what}: {detail}", if pass { "PASS" } else { "FAIL" });
}

// ---------------------------------------------------------------- fixtures

const DESK_VOCAB: usize = 1000;
const DESK_TRAIN: usize = 2000;
const HELD_OUT_INPUTS: usize = 200;

struct Desk {
    vocab: Vocabulary,
    params: ModelParameters,
    /// Training molecules within the token cap, canonical.
    train_set: Vec<String>,
    held_out: Vec<String>,
    train_time: Duration,
}

fn desk_model_config(vocab_size: usize) -> ModelConfig {
    let d = ModelConfig::default();
    ModelConfig {
        embed_dim: 64,
        hidden_dim: 256,
        num_layers: 2,
        vocab_size,
        ar_coeff: d.ar_coeff,
        tar_coeff: d.tar_coeff,
        ..d.without_regularization()
    }
}

fn desk() -> &'static Desk {
    static DESK: OnceLock<Desk> = OnceLock::new();
    DESK.get_or_init(|| {
        let start = Instant::now();
        let raw = synthetic_corpus(5000, 6, 1);
        let mut all = filter_corpus(&raw.smiles).kept;
        all.shuffle(&mut ChaCha8Rng::seed_from_u64(7));
        let held_out = all.split_off(DESK_TRAIN);
        let vocab = train_bpe(&all, DESK_VOCAB).unwrap();
        let (train_set, _) = within_token_cap(&vocab, &all);
        let examples: Vec<TrainExample> = train_set
            .iter()
            .map(|s| TrainExample::new(&vocab, &parse_smiles(s).unwrap(), s).unwrap())
            .collect();
        let mut params = ModelParameters::init(&desk_model_config(vocab.len()), 1).unwrap();
        let tc = TrainConfig {
            epochs: 100,
            batch_size: 64,
            max_lr: 1e-2,
            seed: 1,
            ..TrainConfig::default()
        };
        let r = train(&mut params, &examples, &tc, &mut ()).unwrap();
        println!(
            "desk model: {} molecules, vocab {}, final nll {:.4}, {:.0?}",
            train_set.len(),
            vocab.len(),
            r.epoch_losses.last().unwrap().nll,
            start.elapsed()
        );
        Desk {
            vocab,
            params,
            train_set,
            held_out,
            train_time: start.elapsed(),
        }
    })
}

struct Recovery {
    results: Vec<RecoveryResult>,
    elapsed: Duration,
}

fn desk_recovery() -> &'static Recovery {
    static REC: OnceLock<Recovery> = OnceLock::new();
    REC.get_or_init(|| {
        let d = desk();
        let start = Instant::now();
        let graphs: Vec<MolecularGraph> = d.train_set.iter().map(|s| parse_smiles(s).unwrap()).collect();
        let (results, _) = evaluate_recovery(&d.params, &d.vocab, &graphs, SearchBudget::default()).unwrap();
        Recovery {
            results,
            elapsed: start.elapsed(),
        }
    })
}

const FT_EPOCHS: usize = 12;
const FT_LR: f64 = 0.002;
const FT_DIV: f64 = 5.0;
const FT_BATCH: usize = 16;
const FT_SEEDS: [u64; 3] = [5, 1, 2];
const K_MAX: usize = 20;

struct Transfer {
    inputs: Vec<String>,
    pairs: usize,
    before: Vec<Vec<Candidate>>,
    /// One stream set per fine-tuning seed.
    after: Vec<Vec<Vec<Candidate>>>,
    ensemble: Vec<Vec<Candidate>>,
    first_layer_before: u64,
    first_layer_after: Vec<u64>,
    elapsed: Duration,
}

fn transfer() -> &'static Transfer {
    static T: OnceLock<Transfer> = OnceLock::new();
    T.get_or_init(|| {
        let d = desk();
        let start = Instant::now();
        let hal = HalogenPresence;
        let score = |s: &String| hal.score(&parse_smiles(s).unwrap());
        let halogenated = d.train_set.iter().filter(|s| score(s) > 0.0).count();
        let pc = PairConfig {
            sample_size: d.train_set.len(),
            top_fraction: halogenated as f64 / d.train_set.len() as f64,
            neighbor_cap: 50,
            sim_threshold: 0.4,
            gap_threshold: 1.0,
            seed: 3,
        };
        let pairs = build_matched_pairs(&d.train_set, &hal, &pc).unwrap();
        // Held-out, non-halogenated inputs that have a halogenated analogue in
        // the training set, so an improvement is known to exist.
        let hal_fps: Vec<_> = d
            .train_set
            .iter()
            .filter(|s| score(s) > 0.0)
            .map(|s| ecfp4(&parse_smiles(s).unwrap()))
            .collect();
        let improvable = |s: &String| {
            let f = ecfp4(&parse_smiles(s).unwrap());
            hal_fps.iter().any(|h| tanimoto(&f, h).unwrap() >= pc.sim_threshold)
        };
        let inputs: Vec<String> = d
            .held_out
            .iter()
            .filter(|s| score(s) == 0.0 && improvable(s))
            .take(HELD_OUT_INPUTS)
            .cloned()
            .collect();
        let strategy = desmiles::search::build_strategy(&StrategyConfig::default()).unwrap();
        let before = generate_streams(strategy.as_ref(), &d.params, &d.vocab, &inputs, K_MAX).unwrap();
        let mut tuned = Vec::new();
        let mut first_layer_after = Vec::new();
        for seed in FT_SEEDS {
            let mut p = d.params.clone();
            let fc = FinetuneConfig {
                epochs: FT_EPOCHS,
                max_lr: FT_LR,
                dividing_factor: FT_DIV,
                freeze_first_encoder_layer: true,
                batch_size: FT_BATCH,
                seed,
            };
            finetune(&mut p, &pairs, &d.vocab, &fc, &mut ()).unwrap();
            first_layer_after.push(p.checksum(is_first_encoder_layer));
            tuned.push(p);
        }
        let after = tuned
            .iter()
            .map(|p| generate_streams(strategy.as_ref(), p, &d.vocab, &inputs, K_MAX).unwrap())
            .collect();
        let refs: Vec<&ModelParameters> = tuned.iter().collect();
        let ensemble = inputs
            .par_iter()
            .map(|s| {
                let fp = input_fingerprint(&parse_smiles(s).unwrap());
                ensemble_generate(&refs, &d.vocab, &fp, K_MAX, SearchBudget::default()).unwrap()
            })
            .collect();
        Transfer {
            inputs,
            pairs: pairs.len(),
            before,
            after,
            ensemble,
            first_layer_before: d.params.checksum(is_first_encoder_layer),
            first_layer_after,
            elapsed: start.elapsed(),
        }
    })
}

// ------------------------------------------------------------- criterion 1

#[test]
fn c01_default_parameter_count() {
    let c = ModelConfig::default();
    let (d, e, h, v) = (c.input_bits, c.embed_dim, c.hidden_dim, c.vocab_size);
    // Encoder: batch norm, affine, batch norm, affine.
    let encoder = 2 * d + (h * d + h) + 2 * h + (h * h + h);
    let lstm = |i: usize, n: usize| 4 * n * (i + n) + 8 * n;
    let decoder = v * e + lstm(e, h) + (c.num_layers - 2) * lstm(h, h) + lstm(h, e);
    let counted = c.parameter_count();
    let allocated = Weights::zeros(&c).len();
    let pass = counted == 134_515_392 && encoder + decoder == counted && allocated == counted;
    report(1, "default parameter count", pass, format!("{counted} counted, {allocated} allocated"));
    assert!(pass);
}

// ------------------------------------------------------------- criterion 2

fn toy_model(seed: u64, vocab_size: usize) -> ModelParameters {
    let config = ModelConfig {
        input_bits: 8,
        embed_dim: 3,
        hidden_dim: 4,
        num_layers: 2,
        vocab_size,
        ..ModelConfig::default()
    };
    let mut p = ModelParameters::init(&config, seed).unwrap();
    let sharp = 2.0 + (seed % 7) as f64 * 3.0;
    p.weights.embedding.mapv_inplace(|x| x * sharp);
    p
}

fn enumerate(
    p: &ModelParameters,
    state: &DecoderState,
    path: &mut Vec<u32>,
    g: f64,
    max_payload: usize,
    out: &mut Vec<(f64, Vec<u32>)>,
) {
    let (lp, next) = p.decoder_step(state, *path.last().unwrap()).unwrap();
    for (t, l) in lp.iter().enumerate() {
        path.push(t as u32);
        if t as u32 == END || path.len() - 1 == max_payload + 2 {
            out.push((g - l, path.clone()));
        } else {
            enumerate(p, &next, path, g - l, max_payload, out);
        }
        path.pop();
    }
}

#[test]
fn c02_astar_matches_brute_force() {
    let vocabs = [train_bpe(&["C"], 5).unwrap(), train_bpe(&["CO"], 6).unwrap()];
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for seed in 0..120u64 {
        let vocab = &vocabs[(seed % 2) as usize];
        let p = toy_model(seed, vocab.len());
        let fp = BitFingerprint::from_indices(8, (0..8).filter(|b| ((seed * 37 + 11) >> b) & 1 == 1));
        let max_payload = 1 + (seed as usize % 4);
        let (_, init) = p.encode_fingerprint(&fp).unwrap();
        let mut expected = Vec::new();
        enumerate(&p, &init, &mut vec![START], 0.0, max_payload, &mut expected);
        expected.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        let mut s = AStar::new(&p, vocab, init, SearchBudget::unlimited(max_payload), StateMemory::Keep);
        let mut got = Vec::new();
        while let Some(l) = s.next_leaf().unwrap() {
            got.push((l.g, l.tokens));
        }
        if got != expected {
            mismatches.push(seed);
        }
        checked += 1;
    }
    let pass = checked >= 100 && mismatches.is_empty();
    report(2, "A* leaf order equals enumeration", pass, format!("{checked} models, mismatches {mismatches:?}"));
    assert!(pass);
}

// ------------------------------------------------------------- criterion 3

#[test]
fn c03_astar_beats_beams() {
    let d = desk();
    let astar = desk_recovery().results.iter().filter(|r| r.found).count();
    let graphs: Vec<MolecularGraph> = d.train_set.iter().map(|s| parse_smiles(s).unwrap()).collect();
    let mut counts = Vec::new();
    for width in [100, 10, 1] {
        let beam = BeamStrategy {
            width,
            max_payload_tokens: desmiles::tokenizer::MAX_PAYLOAD_TOKENS,
        };
        let found = graphs
            .par_iter()
            .filter(|g| recover_with(&beam, &d.params, &d.vocab, g, usize::MAX).unwrap().found)
            .count();
        counts.push(found);
    }
    let pass = astar >= counts[0] && counts[0] >= counts[1] && counts[1] >= counts[2];
    report(
        3,
        "A* >= beam-100 >= beam-10 >= beam-1",
        pass,
        format!("{astar} / {} / {} / {} of {}", counts[0], counts[1], counts[2], graphs.len()),
    );
    assert!(pass);
}

// ------------------------------------------------------------- criterion 4

#[test]
fn c04_overfit_recovery() {
    let d = desk();
    let rec = desk_recovery();
    let found = rec.results.iter().filter(|r| r.found).count();
    let rate = found as f64 / rec.results.len() as f64;
    let total = d.train_time + rec.elapsed;
    let pass = d.vocab.len() <= DESK_VOCAB && rate >= 0.85 && total <= Duration::from_secs(3600);
    report(
        4,
        "overfit recovery",
        pass,
        format!(
            "{found}/{} = {:.2}% (training {:.0?}, recovery {:.0?})",
            rec.results.len(),
            100.0 * rate,
            d.train_time,
            rec.elapsed
        ),
    );
    assert!(pass);
}

// ------------------------------------------------------------- criterion 5

#[test]
fn c05_gradient_check() {
    let config = ModelConfig {
        input_bits: 10,
        embed_dim: 3,
        hidden_dim: 5,
        num_layers: 3,
        vocab_size: 7,
        ar_coeff: 2.0,
        tar_coeff: 1.0,
        ..ModelConfig::default().without_regularization()
    };
    let mut params = ModelParameters::init(&config, 21).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (_, t) in params.weights.tensors_mut() {
        for x in t.iter_mut() {
            *x += 0.1 * (rng.random::<f64>() - 0.5);
        }
    }
    let fps = [
        BitFingerprint::from_indices(10, [0, 4, 9]),
        BitFingerprint::from_indices(10, [1, 2, 3, 7]),
    ];
    let batch = Batch::new(&fps.iter().collect::<Vec<_>>(), vec![vec![0, 1, 4, 5, 6, 3], vec![0, 2, 5, 3]]).unwrap();
    let masks = DropoutMasks::none(&config, 2);
    let analytic = forward_backward(&params, &batch, &masks, true).unwrap().grads;
    let eps = 1e-5;
    let mut worst = 0.0f64;
    let mut n = 0;
    for ti in 0..analytic.tensors().len() {
        for k in 0..analytic.tensors()[ti].1.len() {
            let orig = params.weights.tensors()[ti].1[k];
            params.weights.tensors_mut()[ti].1[k] = orig + eps;
            let up = forward_backward(&params, &batch, &masks, false).unwrap().loss.total;
            params.weights.tensors_mut()[ti].1[k] = orig - eps;
            let down = forward_backward(&params, &batch, &masks, false).unwrap().loss.total;
            params.weights.tensors_mut()[ti].1[k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.tensors()[ti].1[k];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
            n += 1;
        }
    }
    let pass = worst <= 1e-4;
    report(5, "gradient check", pass, format!("max relative error {worst:.2e} over {n} parameters"));
    assert!(pass);
}

// ------------------------------------------------------------- criterion 6

#[test]
fn c06_schedule_endpoints() {
    let (max_lr, div) = (3e-3, 7.0);
    let cases = [
        (0.0, max_lr / div, 0.8),
        (0.49, max_lr, 0.6),
        (1.0, max_lr / div / (div * div), 0.8),
    ];
    let mut worst = 0.0f64;
    for (t, lr, m) in cases {
        let s = one_cycle(t, max_lr, div);
        worst = worst.max((s.lr - lr).abs()).max((s.momentum - m).abs());
    }
    let pass = worst <= 1e-12;
    report(6, "one-cycle endpoints", pass, format!("max deviation {worst:.1e}"));
    assert!(pass);
}

// ------------------------------------------------------------- criterion 7

#[test]
fn c07_tokenizer_round_trip() {
    let corpus = filter_corpus(&synthetic_corpus(12_000, 6, 77).smiles).kept;
    let corpus = &corpus[..10_000];
    let vocab = train_bpe(corpus, DESK_VOCAB).unwrap();
    let mut failures = 0;
    for s in corpus {
        for reversed in [false, true] {
            let payload = vocab.payload_tokens(s, reversed).unwrap();
            let mut ids = vec![START, if reversed { 2 } else { 1 }];
            ids.extend(payload);
            ids.push(END);
            if vocab.decode_ids(&ids).ok().as_deref() != Some(s.as_str()) {
                failures += 1;
            }
        }
    }
    let pass = failures == 0;
    report(7, "tokenizer round trip", pass, format!("{failures} failures over {} molecules x 2", corpus.len()));
    assert!(pass);
}

// ------------------------------------------------------------- criterion 8

fn mirror(s: &str) -> String {
    s.replace("@@", "\u{0}").replace('@', "@@").replace('\u{0}', "@")
}

#[test]
fn c08_fingerprint_invariance() {
    let corpus = synthetic_corpus(1000, 6, 99).smiles;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for s in &corpus {
        let g = parse_smiles(s).unwrap();
        let fp = input_fingerprint(&g);
        for _ in 0..5 {
            let r = random_smiles(&g, &mut rng);
            if input_fingerprint(&parse_smiles(&r).unwrap()) != fp {
                mismatches += 1;
            }
        }
    }
    let mut chiral: Vec<String> = corpus.iter().filter(|s| s.contains('@')).cloned().collect();
    chiral.extend(
        ["C[C@H](N)C(=O)O", "O[C@@H](F)Cl", "C[C@@H](O)CC", "N[C@H](Cc1ccccc1)C(=O)O"].map(String::from),
    );
    let (mut distinct, mut same_enantiomers) = (0, 0);
    for s in &chiral {
        let g = parse_smiles(s).unwrap();
        let m = parse_smiles(&mirror(s)).unwrap();
        // Meso forms mirror onto themselves.
        if canonical_smiles(&g) != canonical_smiles(&m) {
            distinct += 1;
            if input_fingerprint(&g) == input_fingerprint(&m) {
                same_enantiomers += 1;
            }
        }
    }
    let pass = mismatches == 0 && distinct > 0 && same_enantiomers == 0;
    report(
        8,
        "fingerprint invariance",
        pass,
        format!(
            "{mismatches} respelling mismatches of 5000; {same_enantiomers} of {distinct} enantiomer pairs collide"
        ),
    );
    assert!(pass);
}

// ------------------------------------------------------------- criterion 9

#[test]
fn c09_transfer_learning_effect() {
    let t = transfer();
    let hal = HalogenPresence;
    let before = evaluate_streams(&t.inputs, &t.before, &hal, 0.4, K_MAX).unwrap().success_rate;
    let after = evaluate_streams(&t.inputs, &t.after[0], &hal, 0.4, K_MAX).unwrap().success_rate;
    let gain = 100.0 * (after - before);
    let frozen = t.first_layer_after.iter().all(|&c| c == t.first_layer_before);
    let pass = t.inputs.len() == HELD_OUT_INPUTS && gain >= 20.0 && frozen && t.elapsed <= Duration::from_secs(1800);
    report(
        9,
        "transfer learning effect",
        pass,
        format!(
            "success@20 {:.1}% -> {:.1}% ({gain:+.1} points, {} pairs); first layer unchanged: {frozen}; {:.0?}",
            100.0 * before,
            100.0 * after,
            t.pairs,
            t.elapsed
        ),
    );
    assert!(pass);
}

// ------------------------------------------------------------ criterion 10

#[test]
fn c10_failure_falls_with_k_and_ensemble_helps() {
    let t = transfer();
    let hal = HalogenPresence;
    let failure = |streams: &[Vec<Candidate>], k: usize| {
        evaluate_streams(&t.inputs, streams, &hal, 0.4, k).unwrap().failure_rate
    };
    let curve: Vec<f64> = [1, 3, 10, 20].iter().map(|&k| failure(&t.after[0], k)).collect();
    let monotone = curve.windows(2).all(|w| w[1] <= w[0]);
    let singles: Vec<f64> = t.after.iter().map(|s| failure(s, K_MAX)).collect();
    let best = singles.iter().copied().fold(f64::INFINITY, f64::min);
    let ensemble = failure(&t.ensemble, K_MAX);
    let pass = monotone && t.after.len() >= 3 && ensemble <= best;
    report(
        10,
        "failure vs k and ensemble",
        pass,
        format!("failure at k=1,3,10,20 {curve:.3?}; singles {singles:.3?}; ensemble {ensemble:.3}"),
    );
    assert!(pass);
}

// ------------------------------------------------------------ criterion 11

#[test]
fn c11_embedding_distance_correlation() {
    let d = desk();
    let fps: Vec<BitFingerprint> = d.train_set.iter().map(|s| input_fingerprint(&parse_smiles(s).unwrap())).collect();
    let r = distance_correlation(&d.params, &fps, 0.1, 400, 1).unwrap();
    let pass = r.r.is_some_and(|x| x > 0.5);
    report(11, "embedding distance correlation", pass, format!("r = {:?} over {} pairs", r.r, r.n_pairs));
    assert!(pass);
}

// ------------------------------------------------------------ criterion 12

#[test]
fn c12_landscape_anchors() {
    let d = desk();
    let anchors = &d.train_set[..3];
    let emb: Vec<_> = anchors
        .iter()
        .map(|s| d.params.embed(&input_fingerprint(&parse_smiles(s).unwrap())).unwrap())
        .collect();
    let basis = plane_from_three(emb[0].view(), emb[1].view(), emb[2].view()).unwrap();
    let budget = SearchBudget::default();
    let at_anchors = sample_points(&d.params, &d.vocab, &basis, &basis.anchor_coords, 5, budget).unwrap();
    let tops: Vec<Option<&str>> = at_anchors.iter().map(|c| c.solutions.first().map(|s| s.smiles.as_str())).collect();
    let anchors_ok = tops.iter().zip(anchors).all(|(t, a)| *t == Some(a.as_str()));
    let grid = sample_grid(&d.params, &d.vocab, &basis, 5, Extent::around_anchors(&basis, 0.25), 5, budget).unwrap();
    let decreasing = grid
        .cells
        .iter()
        .chain(&at_anchors)
        .all(|c| c.solutions.windows(2).all(|w| w[0].probability > w[1].probability));
    let distinct = grid.cells.iter().all(|c| {
        let names: HashSet<&str> = c.solutions.iter().map(|s| s.smiles.as_str()).collect();
        names.len() == c.solutions.len()
    });
    let pass = anchors_ok && decreasing && distinct;
    report(
        12,
        "landscape anchors",
        pass,
        format!("top-1 at anchors {tops:?}; probabilities strictly decreasing: {decreasing}"),
    );
    assert!(pass);
}
