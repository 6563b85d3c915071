//! Run configuration: a TOML file with one flat table per section. Absent
//! keys take their defaults; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::landscape::{DEFAULT_BIN_WIDTH, DEFAULT_PAIRS_PER_BIN};
use crate::net::ModelConfig;
use crate::search::{SearchBudget, StateMemory, StrategyConfig, DEFAULT_MAX_BRANCHES, DEFAULT_MAX_LEAVES};
use crate::tokenizer::{DEFAULT_VOCAB_SIZE, MAX_PAYLOAD_TOKENS};
use crate::train::TrainConfig;
use crate::transfer::{FinetuneConfig, PairConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key:?}: {message}")]
    TypeError { key: String, message: String },
    #[error("configuration is not valid TOML: {0}")]
    Syntax(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub strategy: String,
    pub max_branches: usize,
    pub max_leaves: usize,
    pub max_payload_tokens: usize,
    pub memory: StateMemory,
    pub beam_width: usize,
    pub sample_tries: usize,
}

impl Default for SearchSection {
    fn default() -> Self {
        SearchSection {
            strategy: "astar".into(),
            max_branches: DEFAULT_MAX_BRANCHES,
            max_leaves: DEFAULT_MAX_LEAVES,
            max_payload_tokens: MAX_PAYLOAD_TOKENS,
            memory: StateMemory::Keep,
            beam_width: 10,
            sample_tries: 1000,
        }
    }
}

impl SearchSection {
    pub fn budget(&self) -> SearchBudget {
        SearchBudget {
            max_branches: self.max_branches,
            max_leaves: self.max_leaves,
            max_payload_tokens: self.max_payload_tokens,
        }
    }

    pub fn strategy_config(&self, seed: u64) -> StrategyConfig {
        StrategyConfig {
            name: self.strategy.clone(),
            budget: self.budget(),
            memory: self.memory,
            beam_width: self.beam_width,
            sample_tries: self.sample_tries,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabSection {
    pub size: usize,
}

impl Default for VocabSection {
    fn default() -> Self {
        VocabSection {
            size: DEFAULT_VOCAB_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSection {
    pub scorer: String,
    pub sim_threshold: f64,
    pub k: Vec<usize>,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        BenchmarkSection {
            scorer: "halogen".into(),
            sim_threshold: 0.4,
            k: vec![1, 3, 10, 20],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeSection {
    pub resolution: usize,
    /// Grid margin around the anchors, as a fraction of their spread.
    pub margin: f64,
    pub top_k: usize,
    pub bin_width: f64,
    pub pairs_per_bin: usize,
}

impl Default for LandscapeSection {
    fn default() -> Self {
        LandscapeSection {
            resolution: 21,
            margin: 0.25,
            top_k: 5,
            bin_width: DEFAULT_BIN_WIDTH,
            pairs_per_bin: DEFAULT_PAIRS_PER_BIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub vocab: VocabSection,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub search: SearchSection,
    pub pairs: PairConfig,
    pub finetune: FinetuneConfig,
    pub benchmark: BenchmarkSection,
    pub landscape: LandscapeSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            workers: 1,
            vocab: VocabSection::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            search: SearchSection::default(),
            pairs: PairConfig::default(),
            finetune: FinetuneConfig::default(),
            benchmark: BenchmarkSection::default(),
            landscape: LandscapeSection::default(),
        }
    }
}

impl RunConfig {
    /// Pretty TOML of every resolved value.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }
}

/// First key present in `given` but not in `known`, as a dotted path.
fn unknown_key(given: &toml::Table, known: &toml::Table, prefix: &str) -> Option<String> {
    for (k, v) in given {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match (v, known.get(k)) {
            (_, None) => return Some(path),
            (toml::Value::Table(g), Some(toml::Value::Table(kn))) => {
                if let Some(p) = unknown_key(g, kn, &path) {
                    return Some(p);
                }
            }
            _ => {}
        }
    }
    None
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let given: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().to_string()))?;
    let known = toml::Table::try_from(RunConfig::default()).expect("defaults serialize");
    if let Some(k) = unknown_key(&given, &known, "") {
        return Err(ConfigError::UnknownKey(k));
    }
    toml::from_str(text).map_err(|e| ConfigError::TypeError {
        key: e.span().map(|s| text[s].to_string()).unwrap_or_default(),
        message: e.message().to_string(),
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::one_cycle;

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.model, ModelConfig::default());
        assert_eq!(c.train.max_lr, 1e-3);
        assert_eq!(c.search.max_leaves, 10_000);
    }

    #[test]
    fn override_reaches_the_schedule() {
        let c = parse_config("[train]\nmax_lr = 0.002\n").unwrap();
        let s = one_cycle(0.49, c.train.max_lr, c.train.dividing_factor);
        assert!((s.lr - 0.002).abs() < 1e-15);
    }

    #[test]
    fn unknown_and_mistyped_keys() {
        assert!(matches!(parse_config("[train]\nmax_rate = 1\n"), Err(ConfigError::UnknownKey(k)) if k == "train.max_rate"));
        assert!(matches!(parse_config("colour = 1\n"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(parse_config("[model]\nembed_dim = \"big\"\n"), Err(ConfigError::TypeError { .. })));
        assert!(matches!(parse_config("[model\n"), Err(ConfigError::Syntax(_))));
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = parse_config("seed = 7\n[search]\nstrategy = \"beam\"\nmemory = \"recompute\"\n").unwrap();
        assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
    }
}
