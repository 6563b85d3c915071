//! Regenerating a molecule from its own fingerprint.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chem::{canonical_smiles, parse_smiles, MolecularGraph};
use crate::fingerprint::{input_fingerprint, BitFingerprint};
use crate::net::{ModelParameters, NetError};
use crate::search::{AStar, DecodingStrategy, SearchBudget, SearchError, StateMemory};
use crate::tokenizer::Vocabulary;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub input: String,
    pub found: bool,
    /// 1-based position of the match among the valid distinct molecules.
    pub rank: Option<usize>,
    pub branches_used: usize,
    /// Leaves popped, valid or not.
    pub leaves_emitted: usize,
    pub matched_smiles: Option<String>,
    /// The match is the input molecule itself, not only a fingerprint twin.
    pub graph_exact: bool,
}

fn fingerprint_of(smiles: &str) -> Option<BitFingerprint> {
    parse_smiles(smiles).ok().map(|g| input_fingerprint(&g))
}

/// Runs A* until a molecule with exactly the input fingerprint appears or the
/// budget runs out.
pub fn recover_one(
    params: &ModelParameters,
    vocab: &Vocabulary,
    g: &MolecularGraph,
    budget: SearchBudget,
) -> Result<RecoveryResult, NetError> {
    let fp = input_fingerprint(g);
    let input = canonical_smiles(g);
    let mut stream = AStar::from_fingerprint(params, vocab, &fp, budget, StateMemory::Keep)?;
    let mut matched = None;
    while let Some(c) = stream.next_molecule()? {
        if fingerprint_of(&c.smiles).as_ref() == Some(&fp) {
            matched = Some(c.smiles);
            break;
        }
    }
    Ok(RecoveryResult {
        found: matched.is_some(),
        rank: matched.as_ref().map(|_| stream.emitted()),
        branches_used: stream.branches(),
        leaves_emitted: stream.leaves(),
        graph_exact: matched.as_deref() == Some(input.as_str()),
        matched_smiles: matched,
        input,
    })
}

/// Recovery with any registered strategy: the first of up to `n` candidates
/// whose fingerprint matches. Search statistics other than the candidate
/// count are not tracked.
pub fn recover_with(
    strategy: &dyn DecodingStrategy,
    params: &ModelParameters,
    vocab: &Vocabulary,
    g: &MolecularGraph,
    n: usize,
) -> Result<RecoveryResult, SearchError> {
    let fp = input_fingerprint(g);
    let input = canonical_smiles(g);
    let cands = strategy.generate(params, vocab, &fp, n)?;
    let hit = cands
        .iter()
        .position(|c| fingerprint_of(&c.smiles).as_ref() == Some(&fp));
    let matched = hit.map(|k| cands[k].smiles.clone());
    Ok(RecoveryResult {
        found: hit.is_some(),
        rank: hit.map(|k| k + 1),
        branches_used: 0,
        leaves_emitted: cands.len(),
        graph_exact: matched.as_deref() == Some(input.as_str()),
        matched_smiles: matched,
        input,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    pub count: usize,
    pub found: usize,
    /// Absent for an empty dataset.
    pub rate: Option<f64>,
    pub graph_exact_rate: Option<f64>,
    /// Branch-count percentiles (25, 50, 75, 90) over recovered molecules.
    pub branch_percentiles: BTreeMap<u32, usize>,
    pub rank_histogram: BTreeMap<usize, usize>,
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[usize], p: u32) -> usize {
    let k = ((p as f64 / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[k.clamp(1, sorted.len()) - 1]
}

pub fn summarize(results: &[RecoveryResult]) -> RecoveryMetrics {
    let count = results.len();
    let found = results.iter().filter(|r| r.found).count();
    let exact = results.iter().filter(|r| r.graph_exact).count();
    let mut branches: Vec<usize> = results
        .iter()
        .filter(|r| r.found)
        .map(|r| r.branches_used)
        .collect();
    branches.sort_unstable();
    let mut branch_percentiles = BTreeMap::new();
    if !branches.is_empty() {
        for p in [25, 50, 75, 90] {
            branch_percentiles.insert(p, percentile(&branches, p));
        }
    }
    let mut rank_histogram = BTreeMap::new();
    for r in results.iter().filter_map(|r| r.rank) {
        *rank_histogram.entry(r).or_insert(0) += 1;
    }
    let frac = |k: usize| (count > 0).then(|| k as f64 / count as f64);
    RecoveryMetrics {
        count,
        found,
        rate: frac(found),
        graph_exact_rate: frac(exact),
        branch_percentiles,
        rank_histogram,
    }
}

/// Recovers every molecule of `dataset` (in parallel; the result order
/// follows the input).
pub fn evaluate_recovery(
    params: &ModelParameters,
    vocab: &Vocabulary,
    dataset: &[MolecularGraph],
    budget: SearchBudget,
) -> Result<(Vec<RecoveryResult>, RecoveryMetrics), NetError> {
    let results = dataset
        .par_iter()
        .map(|g| recover_one(params, vocab, g, budget))
        .collect::<Result<Vec<_>, _>>()?;
    let metrics = summarize(&results);
    Ok((results, metrics))
}

/// One JSON object per line.
pub fn write_results_jsonl<W: Write>(out: &mut W, results: &[RecoveryResult]) -> std::io::Result<()> {
    for r in results {
        serde_json::to_writer(&mut *out, r)?;
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(found: bool, rank: Option<usize>, branches: usize, exact: bool) -> RecoveryResult {
        RecoveryResult {
            input: "C".into(),
            found,
            rank,
            branches_used: branches,
            leaves_emitted: 10,
            matched_smiles: found.then(|| "C".into()),
            graph_exact: exact,
        }
    }

    #[test]
    fn empty_dataset_has_no_rate() {
        let m = summarize(&[]);
        assert_eq!(m.count, 0);
        assert_eq!(m.rate, None);
        assert!(m.branch_percentiles.is_empty());
    }

    #[test]
    fn summary_counts() {
        let rs = vec![
            result(true, Some(1), 4, true),
            result(true, Some(3), 16, false),
            result(false, None, 5000, false),
            result(true, Some(1), 32, true),
        ];
        let m = summarize(&rs);
        assert_eq!(m.rate, Some(0.75));
        assert_eq!(m.graph_exact_rate, Some(0.5));
        assert_eq!(m.branch_percentiles[&50], 16);
        assert_eq!(m.branch_percentiles[&90], 32);
        assert_eq!(m.rank_histogram[&1], 2);
        let mut shuffled = rs.clone();
        shuffled.reverse();
        assert_eq!(summarize(&shuffled), m);
    }

    #[test]
    fn jsonl_lines() {
        let mut buf = Vec::new();
        write_results_jsonl(&mut buf, &[result(true, Some(1), 4, true), result(false, None, 9, false)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        let back: RecoveryResult = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(back.rank, Some(1));
    }
}
