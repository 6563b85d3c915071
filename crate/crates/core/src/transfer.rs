//! Property scorers, matched-pair construction, fine-tuning on pairs and
//! evaluation of property improvement.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{parse_smiles, MolecularGraph};
use crate::fingerprint::{ecfp4, hash_words, tanimoto, BitFingerprint};
use crate::net::ModelParameters;
use crate::search::{Candidate, DecodingStrategy, SearchError};
use crate::tokenizer::Vocabulary;
use crate::train::{train, TrainConfig, TrainError, TrainExample, TrainObserver, TrainReport};

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("unknown scorer {0:?} (known: {1})")]
    UnknownScorer(String, String),
    #[error("no matched pairs survived the thresholds")]
    EmptyResult,
    #[error("invalid setting: {0}")]
    InvalidConfig(String),
    #[error("unparsable SMILES {0:?}")]
    BadSmiles(String),
    #[error("malformed pairs file at line {0}")]
    BadPairsLine(usize),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

pub trait PropertyScorer: Send + Sync {
    fn name(&self) -> &'static str;
    fn score(&self, g: &MolecularGraph) -> f64;
    fn direction(&self) -> Direction;
    /// Score a molecule must reach to count as a success, if any.
    fn success_threshold(&self) -> Option<f64> {
        None
    }

    /// How much better `b` is than `a`; positive means improvement.
    fn gain(&self, a: f64, b: f64) -> f64 {
        match self.direction() {
            Direction::HigherIsBetter => b - a,
            Direction::LowerIsBetter => a - b,
        }
    }

    fn meets_threshold(&self, s: f64) -> bool {
        match (self.success_threshold(), self.direction()) {
            (None, _) => true,
            (Some(t), Direction::HigherIsBetter) => s >= t,
            (Some(t), Direction::LowerIsBetter) => s <= t,
        }
    }
}

/// Independent cycles of the bond graph.
pub struct RingCount;

impl PropertyScorer for RingCount {
    fn name(&self) -> &'static str {
        "ring-count"
    }
    fn score(&self, g: &MolecularGraph) -> f64 {
        (g.bonds().len() + g.fragment_count()) as f64 - g.atom_count() as f64
    }
    fn direction(&self) -> Direction {
        Direction::HigherIsBetter
    }
}

/// 1 when any halogen is present, else 0.
pub struct HalogenPresence;

impl PropertyScorer for HalogenPresence {
    fn name(&self) -> &'static str {
        "halogen"
    }
    fn score(&self, g: &MolecularGraph) -> f64 {
        if g.atoms().iter().any(|a| a.element.is_halogen()) {
            1.0
        } else {
            0.0
        }
    }
    fn direction(&self) -> Direction {
        Direction::HigherIsBetter
    }
    fn success_threshold(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// Docking stand-in: minus a seeded weight per ECFP4 bit, summed and divided
/// by the square root of the bit count. Lower is better.
pub struct HashDock {
    pub seed: u32,
}

impl PropertyScorer for HashDock {
    fn name(&self) -> &'static str {
        "hash-dock"
    }
    fn score(&self, g: &MolecularGraph) -> f64 {
        let fp = ecfp4(g);
        let n = fp.count_ones();
        if n == 0 {
            return 0.0;
        }
        let total: f64 = fp
            .ones()
            .map(|b| hash_words(&[self.seed, b as u32]) as f64 / u32::MAX as f64)
            .sum();
        -total / (n as f64).sqrt()
    }
    fn direction(&self) -> Direction {
        Direction::LowerIsBetter
    }
}

type ScorerConstructor = fn() -> Box<dyn PropertyScorer>;

const SCORERS: &[(&str, ScorerConstructor)] = &[
    ("ring-count", || Box::new(RingCount)),
    ("halogen", || Box::new(HalogenPresence)),
    ("hash-dock", || Box::new(HashDock { seed: 0x00D0_C4ED })),
];

pub fn scorer_names() -> Vec<&'static str> {
    SCORERS.iter().map(|(n, _)| *n).collect()
}

pub fn scorer_by_name(name: &str) -> Result<Box<dyn PropertyScorer>, TransferError> {
    SCORERS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, make)| make())
        .ok_or_else(|| TransferError::UnknownScorer(name.to_string(), scorer_names().join(", ")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub source_smiles: String,
    pub target_smiles: String,
    pub source_score: f64,
    pub target_score: f64,
    /// ECFP4 Tanimoto similarity of source and target.
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairConfig {
    pub sample_size: usize,
    pub top_fraction: f64,
    pub neighbor_cap: usize,
    pub sim_threshold: f64,
    pub gap_threshold: f64,
    pub seed: u64,
}

impl Default for PairConfig {
    fn default() -> Self {
        PairConfig {
            sample_size: 50_000,
            top_fraction: 0.05,
            neighbor_cap: 50,
            sim_threshold: 0.4,
            gap_threshold: 1.0,
            seed: 0,
        }
    }
}

struct Scored {
    smiles: String,
    fp: BitFingerprint,
    graph: MolecularGraph,
}

fn parse_all(corpus: &[String]) -> Result<Vec<Scored>, TransferError> {
    corpus
        .par_iter()
        .map(|s| {
            let graph = parse_smiles(s).map_err(|_| TransferError::BadSmiles(s.clone()))?;
            Ok(Scored {
                smiles: s.clone(),
                fp: ecfp4(&graph),
                graph,
            })
        })
        .collect()
}

/// Samples the corpus, takes the best-scoring fraction as parents, finds
/// each parent's most similar neighbours and keeps the pairs
/// (weaker neighbour → parent) whose score gap is large enough.
pub fn build_matched_pairs(
    corpus: &[String],
    scorer: &dyn PropertyScorer,
    config: &PairConfig,
) -> Result<Vec<MatchedPair>, TransferError> {
    if config.sample_size > corpus.len() {
        return Err(TransferError::InvalidConfig(format!(
            "sample_size {} exceeds the corpus size {}",
            config.sample_size,
            corpus.len()
        )));
    }
    if !(0.0..=1.0).contains(&config.top_fraction) {
        return Err(TransferError::InvalidConfig("top_fraction must lie in [0, 1]".into()));
    }
    let mols = parse_all(corpus)?;
    let scores: Vec<f64> = mols.par_iter().map(|m| scorer.score(&m.graph)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sampled = sample(&mut rng, corpus.len(), config.sample_size).into_vec();
    sampled.sort_unstable();
    // Best first; equal scores keep corpus order.
    sampled.sort_by(|&a, &b| scorer.gain(scores[a], scores[b]).total_cmp(&0.0));
    let n_top = (config.top_fraction * config.sample_size as f64).ceil() as usize;
    let parents = &sampled[..n_top.min(sampled.len())];

    let per_parent: Vec<Vec<MatchedPair>> = parents
        .par_iter()
        .map(|&p| {
            let mut near: Vec<(f64, usize)> = (0..mols.len())
                .filter(|&j| j != p)
                .filter_map(|j| {
                    let s = tanimoto(&mols[p].fp, &mols[j].fp).ok()?;
                    (s >= config.sim_threshold).then_some((s, j))
                })
                .collect();
            near.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            near.truncate(config.neighbor_cap);
            near.into_iter()
                .filter(|&(_, j)| scorer.gain(scores[j], scores[p]) >= config.gap_threshold)
                .map(|(s, j)| MatchedPair {
                    source_smiles: mols[j].smiles.clone(),
                    target_smiles: mols[p].smiles.clone(),
                    source_score: scores[j],
                    target_score: scores[p],
                    similarity: s,
                })
                .collect()
        })
        .collect();
    let pairs: Vec<MatchedPair> = per_parent.into_iter().flatten().collect();
    if pairs.is_empty() {
        return Err(TransferError::EmptyResult);
    }
    Ok(pairs)
}

/// Tab-separated: source, target, source score, target score, similarity.
pub fn write_pairs<W: Write>(out: &mut W, pairs: &[MatchedPair]) -> std::io::Result<()> {
    for p in pairs {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            p.source_smiles, p.target_smiles, p.source_score, p.target_score, p.similarity
        )?;
    }
    Ok(())
}

pub fn read_pairs<R: BufRead>(input: R) -> Result<Vec<MatchedPair>, TransferError> {
    let mut pairs = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let num = |k: usize| f[k].parse::<f64>().map_err(|_| TransferError::BadPairsLine(i + 1));
        if f.len() != 5 {
            return Err(TransferError::BadPairsLine(i + 1));
        }
        pairs.push(MatchedPair {
            source_smiles: f[0].to_string(),
            target_smiles: f[1].to_string(),
            source_score: num(2)?,
            target_score: num(3)?,
            similarity: num(4)?,
        });
    }
    Ok(pairs)
}

pub const FINETUNE_LEARNING_RATES: [f64; 3] = [0.002, 0.001, 0.0005];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub max_lr: f64,
    pub dividing_factor: f64,
    pub freeze_first_encoder_layer: bool,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            epochs: 6,
            max_lr: 0.001,
            dividing_factor: 7.0,
            freeze_first_encoder_layer: false,
            batch_size: 200,
            seed: 0,
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<(), TransferError> {
        if !(5..=12).contains(&self.epochs) {
            return Err(TransferError::InvalidConfig(format!("epochs {} outside 5..=12", self.epochs)));
        }
        if !FINETUNE_LEARNING_RATES.contains(&self.max_lr) {
            return Err(TransferError::InvalidConfig(format!(
                "max_lr {} not one of {FINETUNE_LEARNING_RATES:?}",
                self.max_lr
            )));
        }
        if !(5.0..=10.0).contains(&self.dividing_factor) {
            return Err(TransferError::InvalidConfig(format!(
                "dividing_factor {} outside 5..=10",
                self.dividing_factor
            )));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            max_lr: self.max_lr,
            dividing_factor: self.dividing_factor,
            batch_size: self.batch_size,
            seed: self.seed,
            freeze_first_encoder_layer: self.freeze_first_encoder_layer,
            ..TrainConfig::default()
        }
    }
}

/// Trains on (fingerprint of source → target SMILES). Pairs whose target does
/// not fit the tokenizer are skipped with a warning.
pub fn finetune(
    params: &mut ModelParameters,
    pairs: &[MatchedPair],
    vocab: &Vocabulary,
    config: &FinetuneConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainReport, TransferError> {
    config.validate()?;
    let mut examples = Vec::with_capacity(pairs.len());
    for p in pairs {
        let g = parse_smiles(&p.source_smiles).map_err(|_| TransferError::BadSmiles(p.source_smiles.clone()))?;
        match TrainExample::new(vocab, &g, &p.target_smiles) {
            Ok(e) => examples.push(e),
            Err(e) => log::warn!("skipping pair {} -> {}: {e}", p.source_smiles, p.target_smiles),
        }
    }
    Ok(train(params, &examples, &config.train_config(), observer)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputOutcome {
    pub input: String,
    pub input_score: f64,
    /// 1-based position of the first success in the stream.
    pub first_success: Option<usize>,
    pub generated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub k: usize,
    pub success_rate: f64,
    pub failure_rate: f64,
    /// Mean over succeeding inputs of the average pairwise Tanimoto distance
    /// among that input's successes; absent when nothing succeeded.
    pub diversity: Option<f64>,
    pub per_input: Vec<InputOutcome>,
}

/// The first `k` molecules of each input's stream.
pub fn generate_streams(
    strategy: &dyn DecodingStrategy,
    params: &ModelParameters,
    vocab: &Vocabulary,
    inputs: &[String],
    k: usize,
) -> Result<Vec<Vec<Candidate>>, TransferError> {
    inputs
        .par_iter()
        .map(|s| {
            let g = parse_smiles(s).map_err(|_| TransferError::BadSmiles(s.clone()))?;
            Ok(strategy.generate(params, vocab, &crate::fingerprint::input_fingerprint(&g), k)?)
        })
        .collect()
}

/// Scores precomputed streams at cutoff `k`. A generated molecule succeeds
/// when it is similar enough to the input, improves on the input's score and
/// meets the scorer's threshold, if it has one.
pub fn evaluate_streams(
    inputs: &[String],
    streams: &[Vec<Candidate>],
    scorer: &dyn PropertyScorer,
    sim_threshold: f64,
    k: usize,
) -> Result<BenchmarkResult, TransferError> {
    if k == 0 {
        return Err(TransferError::InvalidConfig("k must be at least 1".into()));
    }
    let mut per_input = Vec::with_capacity(inputs.len());
    let mut diversities = Vec::new();
    for (input, stream) in inputs.iter().zip(streams) {
        let g = parse_smiles(input).map_err(|_| TransferError::BadSmiles(input.clone()))?;
        let fp = ecfp4(&g);
        let base = scorer.score(&g);
        let mut successes: Vec<(usize, BitFingerprint)> = Vec::new();
        let mut seen = HashSet::new();
        for (pos, c) in stream.iter().take(k).enumerate() {
            if !seen.insert(c.smiles.as_str()) {
                continue;
            }
            let Ok(out) = parse_smiles(&c.smiles) else { continue };
            let ofp = ecfp4(&out);
            let s = scorer.score(&out);
            let similar = tanimoto(&fp, &ofp).map(|t| t >= sim_threshold).unwrap_or(false);
            if similar && scorer.gain(base, s) > 0.0 && scorer.meets_threshold(s) {
                successes.push((pos + 1, ofp));
            }
        }
        if !successes.is_empty() {
            let mut total = 0.0;
            let mut n = 0usize;
            for a in 0..successes.len() {
                for b in a + 1..successes.len() {
                    total += 1.0 - tanimoto(&successes[a].1, &successes[b].1).unwrap_or(1.0);
                    n += 1;
                }
            }
            diversities.push(if n == 0 { 0.0 } else { total / n as f64 });
        }
        per_input.push(InputOutcome {
            input: input.clone(),
            input_score: base,
            first_success: successes.first().map(|s| s.0),
            generated: stream.len().min(k),
        });
    }
    let n_ok = per_input.iter().filter(|o| o.first_success.is_some()).count();
    let success_rate = if inputs.is_empty() {
        0.0
    } else {
        n_ok as f64 / inputs.len() as f64
    };
    Ok(BenchmarkResult {
        k,
        success_rate,
        failure_rate: 1.0 - success_rate,
        diversity: (!diversities.is_empty()).then(|| diversities.iter().sum::<f64>() / diversities.len() as f64),
        per_input,
    })
}
