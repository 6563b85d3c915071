use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{decode_leaf, Candidate};
use crate::fingerprint::BitFingerprint;
use crate::net::{ModelParameters, NetError};
use crate::tokenizer::{Vocabulary, END, START};

/// Draws `tries` sequences token by token from the decoder distribution and
/// returns the distinct valid molecules, most probable first.
pub fn random_sample(
    params: &ModelParameters,
    vocab: &Vocabulary,
    fp: &BitFingerprint,
    tries: usize,
    max_payload_tokens: usize,
    seed: u64,
) -> Result<Vec<Candidate>, NetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, init) = params.encode_fingerprint(fp)?;
    let mut best: HashMap<String, f64> = HashMap::new();
    for _ in 0..tries {
        let mut state = init.clone();
        let mut path = vec![START];
        let mut log_prob = 0.0;
        loop {
            let (lp, next) = params.decoder_step(&state, *path.last().unwrap())?;
            let weights: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
            let dist = WeightedIndex::new(&weights)
                .map_err(|e| NetError::ShapeMismatch(format!("degenerate distribution: {e}")))?;
            let t = dist.sample(&mut rng);
            log_prob += lp[t];
            path.push(t as u32);
            state = next;
            if t as u32 == END || path.len() > max_payload_tokens + 2 {
                break;
            }
        }
        if let Some(smiles) = decode_leaf(vocab, &path) {
            let e = best.entry(smiles).or_insert(f64::NEG_INFINITY);
            *e = e.max(log_prob);
        }
    }
    let mut out: Vec<Candidate> = best
        .into_iter()
        .map(|(smiles, log_prob)| Candidate { smiles, log_prob })
        .collect();
    out.sort_by(|a, b| b.log_prob.total_cmp(&a.log_prob).then_with(|| a.smiles.cmp(&b.smiles)));
    Ok(out)
}
