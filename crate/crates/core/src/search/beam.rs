use std::cmp::Ordering;
use std::collections::HashSet;

use super::{decode_leaf, Candidate};
use crate::fingerprint::BitFingerprint;
use crate::net::{DecoderState, ModelParameters, NetError};
use crate::tokenizer::{Vocabulary, END, START};

struct Hyp {
    path: Vec<u32>,
    log_prob: f64,
    /// Next-token distribution after `path`.
    next: Vec<f64>,
    state: DecoderState,
}

fn rank(a: (f64, &[u32]), b: (f64, &[u32])) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

/// Beam search of the given width. At each step the `width` best extensions
/// of the live hypotheses are kept; those ending in END or at the length cap
/// retire to the finished pool. Returns distinct valid molecules from the
/// pool, most probable first.
pub fn beam_search(
    params: &ModelParameters,
    vocab: &Vocabulary,
    fp: &BitFingerprint,
    width: usize,
    max_payload_tokens: usize,
) -> Result<Vec<Candidate>, NetError> {
    let (_, init) = params.encode_fingerprint(fp)?;
    let (next, state) = params.decoder_step(&init, START)?;
    let mut live = vec![Hyp {
        path: vec![START],
        log_prob: 0.0,
        next,
        state,
    }];
    let max_depth = max_payload_tokens + 2;
    let mut finished: Vec<(f64, Vec<u32>)> = Vec::new();
    while !live.is_empty() && width > 0 {
        // (log p, hypothesis, token)
        let mut cands: Vec<(f64, usize, u32)> = Vec::with_capacity(live.len() * params.config.vocab_size);
        for (hi, h) in live.iter().enumerate() {
            for (t, lp) in h.next.iter().enumerate() {
                cands.push((h.log_prob + lp, hi, t as u32));
            }
        }
        // Hypotheses are already in path order, so (hyp, token) orders paths.
        let cmp = |a: &(f64, usize, u32), b: &(f64, usize, u32)| {
            b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
        };
        if cands.len() > width {
            cands.select_nth_unstable_by(width - 1, cmp);
            cands.truncate(width);
        }
        cands.sort_by(cmp);

        let mut grow: Vec<(Vec<u32>, f64, usize)> = Vec::new();
        for (lp, hi, t) in cands {
            let mut path = live[hi].path.clone();
            path.push(t);
            if t == END || path.len() > max_depth {
                finished.push((lp, path));
            } else {
                grow.push((path, lp, hi));
            }
        }
        let states: Vec<&DecoderState> = grow.iter().map(|g| &live[g.2].state).collect();
        let tokens: Vec<u32> = grow.iter().map(|g| *g.0.last().unwrap()).collect();
        let (dists, next_states) = params.decoder_step_batch(&states, &tokens)?;
        let mut next_live = Vec::with_capacity(grow.len());
        for (((path, log_prob, _), next), state) in grow.into_iter().zip(dists).zip(next_states) {
            next_live.push(Hyp {
                path,
                log_prob,
                next,
                state,
            });
        }
        // Keep hypotheses in path order for the tie-break above.
        next_live.sort_by(|a, b| a.path.cmp(&b.path));
        live = next_live;
    }
    finished.sort_by(|a, b| rank((a.0, &a.1), (b.0, &b.1)));
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (lp, path) in finished {
        if let Some(smiles) = decode_leaf(vocab, &path) {
            if seen.insert(smiles.clone()) {
                out.push(Candidate { smiles, log_prob: lp });
            }
        }
    }
    Ok(out)
}
