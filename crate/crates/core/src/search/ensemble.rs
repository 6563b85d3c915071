use std::collections::HashSet;

use super::{AStar, Candidate, SearchBudget, StateMemory};
use crate::fingerprint::BitFingerprint;
use crate::net::{ModelParameters, NetError};
use crate::tokenizer::Vocabulary;

/// Merges the A* streams of several models position by position. At each
/// position the most probable of the models' k-th molecules that has not
/// been output yet is taken; a position where every k-th molecule is a
/// repeat contributes nothing. Stops after `n` molecules or when every
/// stream is exhausted.
pub fn ensemble_generate(
    models: &[&ModelParameters],
    vocab: &Vocabulary,
    fp: &BitFingerprint,
    n: usize,
    budget: SearchBudget,
) -> Result<Vec<Candidate>, NetError> {
    let mut streams = models
        .iter()
        .map(|m| AStar::from_fingerprint(m, vocab, fp, budget, StateMemory::Keep))
        .collect::<Result<Vec<_>, _>>()?;
    let mut live = vec![true; streams.len()];
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    while out.len() < n && live.iter().any(|&l| l) {
        let mut row: Vec<Candidate> = Vec::new();
        for (s, alive) in streams.iter_mut().zip(live.iter_mut()) {
            if !*alive {
                continue;
            }
            match s.next_molecule()? {
                Some(c) => row.push(c),
                None => *alive = false,
            }
        }
        row.sort_by(|a, b| b.log_prob.total_cmp(&a.log_prob).then_with(|| a.smiles.cmp(&b.smiles)));
        if let Some(c) = row.into_iter().find(|c| !seen.contains(&c.smiles)) {
            seen.insert(c.smiles.clone());
            out.push(c);
        }
    }
    Ok(out)
}
