//! Fingerprint encoder and recurrent token decoder.
//!
//! The encoder is two batch-norm → affine → tanh layers. The output of the
//! first is the fingerprint *embedding*; the second produces the vector that
//! initialises both the hidden and the cell state of the first recurrent
//! layer. The decoder is a stack of LSTM layers over token embeddings whose
//! output projection reuses the embedding matrix.

mod checkpoint;
mod infer;
mod params;
mod training;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use infer::DecoderState;
pub use params::{Lstm, ModelParameters, Weights};
pub use training::{
    forward_backward, training_forward, Batch, BatchNormStats, DropoutMasks, ForwardBackward,
    LossBreakdown,
};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("fingerprint width {got} does not match model input width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("token id {0} is outside the vocabulary")]
    InvalidToken(u32),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint vocabulary hash {found} does not match vocabulary {expected}")]
    VocabMismatch { expected: String, found: String },
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub input_bits: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub vocab_size: usize,
    /// Dropout before the encoder's second affine layer.
    pub p_enc: f64,
    /// Whole-row embedding dropout.
    pub p_embed: f64,
    /// Variational dropout on decoder inputs.
    pub p_input: f64,
    /// Variational dropout between recurrent layers.
    pub p_hidden: f64,
    /// Variational dropout on the last recurrent layer's output.
    pub p_output: f64,
    /// DropConnect on hidden-to-hidden weights.
    pub p_weight: f64,
    pub ar_coeff: f64,
    pub tar_coeff: f64,
    /// Per-update multiplicative shrink: `w ← w·(1 − weight_decay)`.
    pub weight_decay: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_bits: 4096,
            embed_dim: 400,
            hidden_dim: 2000,
            num_layers: 5,
            vocab_size: 8000,
            p_enc: 0.1,
            p_embed: 0.014,
            p_input: 0.175,
            p_hidden: 0.105,
            p_output: 0.07,
            p_weight: 0.14,
            ar_coeff: 2.0,
            tar_coeff: 1.0,
            weight_decay: 1e-7,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: &str| Err(NetError::InvalidConfig(m.to_string()));
        if self.input_bits == 0 || self.embed_dim == 0 || self.hidden_dim == 0 {
            return bad("dimensions must be positive");
        }
        if self.num_layers < 2 {
            return bad("num_layers must be at least 2");
        }
        if self.vocab_size <= crate::tokenizer::SPECIAL_COUNT {
            return bad("vocab_size must exceed the special tokens");
        }
        for p in [
            self.p_enc,
            self.p_embed,
            self.p_input,
            self.p_hidden,
            self.p_output,
            self.p_weight,
        ] {
            if !(0.0..1.0).contains(&p) {
                return bad("dropout rates must lie in [0, 1)");
            }
        }
        if self.ar_coeff < 0.0 || self.tar_coeff < 0.0 || !(0.0..1.0).contains(&self.weight_decay) {
            return bad("regularisation coefficients must be non-negative");
        }
        Ok(())
    }

    /// Same dimensions with every dropout rate and activation penalty off.
    pub fn without_regularization(&self) -> ModelConfig {
        ModelConfig {
            p_enc: 0.0,
            p_embed: 0.0,
            p_input: 0.0,
            p_hidden: 0.0,
            p_output: 0.0,
            p_weight: 0.0,
            ar_coeff: 0.0,
            tar_coeff: 0.0,
            ..self.clone()
        }
    }

    /// Input width of recurrent layer `l`.
    pub fn layer_input(&self, l: usize) -> usize {
        if l == 0 {
            self.embed_dim
        } else {
            self.hidden_dim
        }
    }

    /// Hidden width of recurrent layer `l`; the last layer matches the embedding.
    pub fn layer_hidden(&self, l: usize) -> usize {
        if l + 1 == self.num_layers {
            self.embed_dim
        } else {
            self.hidden_dim
        }
    }

    /// Shapes of all trainable tensors, in checkpoint order.
    pub fn parameter_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let (d, h, e, v) = (self.input_bits, self.hidden_dim, self.embed_dim, self.vocab_size);
        let mut out = vec![
            ("encoder.bn1.weight".to_string(), vec![d]),
            ("encoder.bn1.bias".to_string(), vec![d]),
            ("encoder.fc1.weight".to_string(), vec![h, d]),
            ("encoder.fc1.bias".to_string(), vec![h]),
            ("encoder.bn2.weight".to_string(), vec![h]),
            ("encoder.bn2.bias".to_string(), vec![h]),
            ("encoder.fc2.weight".to_string(), vec![h, h]),
            ("encoder.fc2.bias".to_string(), vec![h]),
            ("decoder.embedding.weight".to_string(), vec![v, e]),
        ];
        for l in 0..self.num_layers {
            let (i, n) = (self.layer_input(l), self.layer_hidden(l));
            out.push((format!("decoder.lstm.{l}.weight_ih"), vec![4 * n, i]));
            out.push((format!("decoder.lstm.{l}.weight_hh"), vec![4 * n, n]));
            out.push((format!("decoder.lstm.{l}.bias_ih"), vec![4 * n]));
            out.push((format!("decoder.lstm.{l}.bias_hh"), vec![4 * n]));
        }
        out
    }

    /// Number of trainable scalars; the output projection is the embedding
    /// matrix and adds none.
    pub fn parameter_count(&self) -> usize {
        self.parameter_shapes()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }
}

/// Names of the tensors that make up the fingerprint-to-embedding layer.
pub fn is_first_encoder_layer(name: &str) -> bool {
    name.starts_with("encoder.bn1.") || name.starts_with("encoder.fc1.")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_parameter_count() {
        assert_eq!(ModelConfig::default().parameter_count(), 134_515_392);
    }

    #[test]
    fn layer_sizes() {
        let c = ModelConfig::default();
        assert_eq!(c.layer_input(0), 400);
        assert_eq!(c.layer_hidden(0), 2000);
        assert_eq!(c.layer_input(4), 2000);
        assert_eq!(c.layer_hidden(4), 400);
    }

    #[test]
    fn validation() {
        assert!(ModelConfig::default().validate().is_ok());
        let c = ModelConfig {
            num_layers: 1,
            ..ModelConfig::default()
        };
        assert!(c.validate().is_err());
        let c = ModelConfig {
            p_embed: 1.0,
            ..ModelConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
