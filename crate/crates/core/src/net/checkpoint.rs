//! Binary checkpoint: magic, format version, a JSON header (model config,
//! vocabulary hash, tensor directory), then every tensor as little-endian
//! `f32` in directory order.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelParameters, NetError, Weights};
use crate::tokenizer::Vocabulary;

const MAGIC: &[u8; 8] = b"DSMLCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: ModelConfig,
    vocab_hash: String,
    tensors: Vec<TensorEntry>,
}

const BUFFERS: [&str; 4] = [
    "encoder.bn1.running_mean",
    "encoder.bn1.running_var",
    "encoder.bn2.running_mean",
    "encoder.bn2.running_var",
];

fn buffers(p: &ModelParameters) -> [&Array1<f64>; 4] {
    [&p.bn1_mean, &p.bn1_var, &p.bn2_mean, &p.bn2_var]
}

pub fn save_checkpoint(path: &Path, params: &ModelParameters, vocab: &Vocabulary) -> Result<(), NetError> {
    let mut entries: Vec<TensorEntry> = params
        .config
        .parameter_shapes()
        .into_iter()
        .map(|(name, shape)| TensorEntry { name, shape })
        .collect();
    for (name, b) in BUFFERS.iter().zip(buffers(params)) {
        entries.push(TensorEntry {
            name: name.to_string(),
            shape: vec![b.len()],
        });
    }
    let header = Header {
        format_version: CHECKPOINT_VERSION,
        config: params.config.clone(),
        vocab_hash: vocab.content_hash(),
        tensors: entries,
    };
    let json = serde_json::to_vec(&header).map_err(|e| NetError::Checkpoint(e.to_string()))?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    let tensors = params.weights.tensors();
    let bufs = buffers(params);
    let data = tensors
        .iter()
        .map(|(_, t)| *t)
        .chain(bufs.iter().map(|b| b.as_slice().unwrap()));
    for t in data {
        for &x in t {
            out.write_all(&(x as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a checkpoint without checking it against a vocabulary; returns the
/// parameters and the recorded vocabulary hash.
pub fn read_checkpoint(path: &Path) -> Result<(ModelParameters, String), NetError> {
    let bad = |m: String| NetError::Checkpoint(m);
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file".into()));
    }
    let mut word = [0u8; 4];
    f.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let mut len = [0u8; 8];
    f.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 24 {
        return Err(bad("header too large".into()));
    }
    let mut json = vec![0u8; len];
    f.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| bad(e.to_string()))?;
    header.config.validate()?;
    let expected: Vec<(String, Vec<usize>)> = header
        .config
        .parameter_shapes()
        .into_iter()
        .chain(BUFFERS.iter().enumerate().map(|(k, n)| {
            let w = if k < 2 {
                header.config.input_bits
            } else {
                header.config.hidden_dim
            };
            (n.to_string(), vec![w])
        }))
        .collect();
    let found: Vec<(String, Vec<usize>)> = header
        .tensors
        .iter()
        .map(|t| (t.name.clone(), t.shape.clone()))
        .collect();
    if expected != found {
        return Err(bad("tensor directory does not match the model configuration".into()));
    }

    let mut read_into = |dst: &mut [f64]| -> Result<(), NetError> {
        let mut buf = vec![0u8; dst.len() * 4];
        f.read_exact(&mut buf)?;
        for (x, b) in dst.iter_mut().zip(buf.chunks_exact(4)) {
            *x = f32::from_le_bytes(b.try_into().unwrap()) as f64;
        }
        Ok(())
    };
    let mut weights = Weights::zeros(&header.config);
    for (_, t) in weights.tensors_mut() {
        read_into(t)?;
    }
    let mut bufs: Vec<Array1<f64>> = Vec::new();
    for (_, shape) in &expected[expected.len() - 4..] {
        let mut b = Array1::zeros(shape[0]);
        read_into(b.as_slice_mut().unwrap())?;
        bufs.push(b);
    }
    let mut rest = Vec::new();
    f.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(bad("trailing bytes after tensor data".into()));
    }
    if !weights.all_finite() {
        return Err(bad("non-finite parameter values".into()));
    }
    let bn2_var = bufs.pop().unwrap();
    let bn2_mean = bufs.pop().unwrap();
    let bn1_var = bufs.pop().unwrap();
    let bn1_mean = bufs.pop().unwrap();
    Ok((
        ModelParameters {
            config: header.config,
            weights,
            bn1_mean,
            bn1_var,
            bn2_mean,
            bn2_var,
        },
        header.vocab_hash,
    ))
}

/// Reads a checkpoint and verifies it was trained with `vocab`.
pub fn load_checkpoint(path: &Path, vocab: &Vocabulary) -> Result<ModelParameters, NetError> {
    let (params, hash) = read_checkpoint(path)?;
    let expected = vocab.content_hash();
    if hash != expected {
        return Err(NetError::VocabMismatch {
            expected,
            found: hash,
        });
    }
    if params.config.vocab_size != vocab.len() {
        return Err(NetError::Checkpoint(format!(
            "model vocabulary size {} differs from vocabulary with {} tokens",
            params.config.vocab_size,
            vocab.len()
        )));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::train_bpe;

    #[test]
    fn round_trip_and_vocab_check() {
        let vocab = train_bpe(&["CCO", "c1ccccc1"], 12).unwrap();
        let c = ModelConfig {
            input_bits: 16,
            embed_dim: 3,
            hidden_dim: 5,
            num_layers: 2,
            vocab_size: vocab.len(),
            ..ModelConfig::default()
        };
        let p = ModelParameters::init(&c, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&path, &p, &vocab).unwrap();
        let q = load_checkpoint(&path, &vocab).unwrap();
        assert_eq!(q.config, p.config);
        for ((_, a), (_, b)) in p.weights.tensors().iter().zip(q.weights.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
        let other = train_bpe(&["NNO"], 8).unwrap();
        assert!(matches!(load_checkpoint(&path, &other), Err(NetError::VocabMismatch { .. })));
    }
}
