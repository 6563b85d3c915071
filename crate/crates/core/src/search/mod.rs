//! Decoding strategies: A* enumeration, beam search, ancestral sampling and
//! model ensembling. Strategies sit behind [`DecodingStrategy`] and are
//! looked up by name.

mod astar;
mod beam;
mod ensemble;
mod sample;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use astar::{decode_leaf, AStar, RawLeaf};
pub use beam::beam_search;
pub use ensemble::ensemble_generate;
pub use sample::random_sample;

use crate::fingerprint::BitFingerprint;
use crate::net::{ModelParameters, NetError};
use crate::tokenizer::{Vocabulary, MAX_PAYLOAD_TOKENS};

pub const DEFAULT_MAX_BRANCHES: usize = 5000;
pub const DEFAULT_MAX_LEAVES: usize = 10_000;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("unknown decoding strategy {0:?} (known: {1})")]
    UnknownStrategy(String, String),
    #[error("invalid search setting: {0}")]
    InvalidSetting(String),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Limits on the A* tree walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchBudget {
    /// Expansions after which only already-queued nodes are popped.
    pub max_branches: usize,
    /// Leaves (valid or not) after which the stream ends.
    pub max_leaves: usize,
    pub max_payload_tokens: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_branches: DEFAULT_MAX_BRANCHES,
            max_leaves: DEFAULT_MAX_LEAVES,
            max_payload_tokens: MAX_PAYLOAD_TOKENS,
        }
    }
}

impl SearchBudget {
    pub fn unlimited(max_payload_tokens: usize) -> SearchBudget {
        SearchBudget {
            max_branches: usize::MAX,
            max_leaves: usize::MAX,
            max_payload_tokens,
        }
    }
}

/// Whether A* keeps the decoder state of every expanded node or replays the
/// prefix when a node is expanded. Both give identical output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateMemory {
    #[default]
    Keep,
    Recompute,
}

/// A generated molecule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Canonical SMILES.
    pub smiles: String,
    /// Log-probability of the token path that produced it.
    pub log_prob: f64,
}

/// Settings shared by the registered strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    pub name: String,
    pub budget: SearchBudget,
    pub memory: StateMemory,
    pub beam_width: usize,
    pub sample_tries: usize,
    pub seed: u64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            name: "astar".into(),
            budget: SearchBudget::default(),
            memory: StateMemory::Keep,
            beam_width: 10,
            sample_tries: 1000,
            seed: 0,
        }
    }
}

pub trait DecodingStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    /// Up to `n` distinct valid molecules for `fp`, best first.
    fn generate(
        &self,
        params: &ModelParameters,
        vocab: &Vocabulary,
        fp: &BitFingerprint,
        n: usize,
    ) -> Result<Vec<Candidate>, SearchError>;
}

pub struct AStarStrategy {
    pub budget: SearchBudget,
    pub memory: StateMemory,
}

impl DecodingStrategy for AStarStrategy {
    fn name(&self) -> &'static str {
        "astar"
    }

    fn generate(
        &self,
        params: &ModelParameters,
        vocab: &Vocabulary,
        fp: &BitFingerprint,
        n: usize,
    ) -> Result<Vec<Candidate>, SearchError> {
        let mut stream = AStar::from_fingerprint(params, vocab, fp, self.budget, self.memory)?;
        let mut out = Vec::new();
        while out.len() < n {
            match stream.next_molecule()? {
                Some(c) => out.push(c),
                None => break,
            }
        }
        Ok(out)
    }
}

pub struct BeamStrategy {
    pub width: usize,
    pub max_payload_tokens: usize,
}

impl DecodingStrategy for BeamStrategy {
    fn name(&self) -> &'static str {
        "beam"
    }

    fn generate(
        &self,
        params: &ModelParameters,
        vocab: &Vocabulary,
        fp: &BitFingerprint,
        n: usize,
    ) -> Result<Vec<Candidate>, SearchError> {
        let mut out = beam_search(params, vocab, fp, self.width, self.max_payload_tokens)?;
        out.truncate(n);
        Ok(out)
    }
}

pub struct SampleStrategy {
    pub tries: usize,
    pub max_payload_tokens: usize,
    pub seed: u64,
}

impl DecodingStrategy for SampleStrategy {
    fn name(&self) -> &'static str {
        "sample"
    }

    fn generate(
        &self,
        params: &ModelParameters,
        vocab: &Vocabulary,
        fp: &BitFingerprint,
        n: usize,
    ) -> Result<Vec<Candidate>, SearchError> {
        let mut out = random_sample(params, vocab, fp, self.tries, self.max_payload_tokens, self.seed)?;
        out.truncate(n);
        Ok(out)
    }
}

type Constructor = fn(&StrategyConfig) -> Result<Box<dyn DecodingStrategy>, SearchError>;

const STRATEGIES: &[(&str, Constructor)] = &[
    ("astar", |c| {
        Ok(Box::new(AStarStrategy {
            budget: c.budget,
            memory: c.memory,
        }))
    }),
    ("beam", |c| {
        if c.beam_width == 0 {
            return Err(SearchError::InvalidSetting("beam_width must be positive".into()));
        }
        Ok(Box::new(BeamStrategy {
            width: c.beam_width,
            max_payload_tokens: c.budget.max_payload_tokens,
        }))
    }),
    ("sample", |c| {
        Ok(Box::new(SampleStrategy {
            tries: c.sample_tries,
            max_payload_tokens: c.budget.max_payload_tokens,
            seed: c.seed,
        }))
    }),
];

pub fn strategy_names() -> Vec<&'static str> {
    STRATEGIES.iter().map(|(n, _)| *n).collect()
}

/// Builds the strategy registered under `config.name`.
pub fn build_strategy(config: &StrategyConfig) -> Result<Box<dyn DecodingStrategy>, SearchError> {
    STRATEGIES
        .iter()
        .find(|(n, _)| *n == config.name)
        .map(|(_, make)| make(config))
        .unwrap_or_else(|| {
            Err(SearchError::UnknownStrategy(
                config.name.clone(),
                strategy_names().join(", "),
            ))
        })
}
