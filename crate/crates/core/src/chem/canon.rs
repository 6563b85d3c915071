//! Canonical atom ranking by iterative neighbourhood refinement.
//!
//! Initial classes come from per-atom invariants (element, charge, degree,
//! attached hydrogens, aromaticity, smallest ring size). Classes are refined
//! with sorted `(bond order, neighbour class)` multisets until stable. Ties
//! that survive refinement are broken by individualising each member of the
//! first tied class in turn and keeping the ordering whose SMILES is
//! lexicographically smallest.

use super::graph::MolecularGraph;
use super::writer::write_smiles_with_ranks;

/// Maximum number of complete orderings examined while breaking ties.
/// Beyond it the remaining tied classes are split at their first member.
const TIE_BREAK_BUDGET: usize = 64;

fn dense_ranks<K: Ord>(keys: &[K]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0; keys.len()];
    let mut r = 0;
    for w in 0..idx.len() {
        if w > 0 && keys[idx[w]] != keys[idx[w - 1]] {
            r += 1;
        }
        ranks[idx[w]] = r;
    }
    ranks
}

fn class_count(ranks: &[usize]) -> usize {
    ranks.iter().max().map_or(0, |m| m + 1)
}

fn initial_invariants(g: &MolecularGraph) -> Vec<usize> {
    let rings = g.smallest_atom_rings();
    let keys: Vec<_> = (0..g.atom_count())
        .map(|i| {
            let a = g.atom(i);
            (
                a.element.atomic_number(),
                g.degree(i),
                g.total_h_count(i),
                a.formal_charge,
                a.aromatic,
                rings[i].unwrap_or(0),
            )
        })
        .collect();
    dense_ranks(&keys)
}

fn refine(g: &MolecularGraph, mut ranks: Vec<usize>) -> Vec<usize> {
    loop {
        let before = class_count(&ranks);
        let keys: Vec<(usize, Vec<(usize, u32)>)> = (0..g.atom_count())
            .map(|i| {
                let mut env: Vec<(usize, u32)> = g
                    .neighbors(i)
                    .iter()
                    .map(|&(n, bi)| (ranks[n], g.bond(bi).order.code()))
                    .collect();
                env.sort_unstable();
                (ranks[i], env)
            })
            .collect();
        ranks = dense_ranks(&keys);
        if class_count(&ranks) == before {
            return ranks;
        }
    }
}

/// Graph-symmetry classes: equal values for atoms that refinement cannot tell
/// apart. Independent of atom numbering.
pub fn symmetry_classes(g: &MolecularGraph) -> Vec<usize> {
    refine(g, initial_invariants(g))
}

fn first_tied_class(ranks: &[usize]) -> Option<Vec<usize>> {
    let mut counts = vec![0usize; ranks.len()];
    for &r in ranks {
        counts[r] += 1;
    }
    let target = counts.iter().position(|&c| c > 1)?;
    Some(
        (0..ranks.len())
            .filter(|&i| ranks[i] == target)
            .collect(),
    )
}

fn individualise(g: &MolecularGraph, ranks: &[usize], atom: usize) -> Vec<usize> {
    let r = ranks[atom];
    let split: Vec<usize> = ranks
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let twice = 2 * x;
            if x == r && i != atom {
                twice + 1
            } else {
                twice
            }
        })
        .collect();
    refine(g, dense_ranks(&split))
}

struct Search<'g> {
    g: &'g MolecularGraph,
    leaves: usize,
    best: Option<(String, Vec<usize>)>,
}

impl Search<'_> {
    fn explore(&mut self, ranks: Vec<usize>) {
        let Some(class) = first_tied_class(&ranks) else {
            self.leaves += 1;
            let s = write_smiles_with_ranks(self.g, &ranks);
            if self.best.as_ref().is_none_or(|(b, _)| s < *b) {
                self.best = Some((s, ranks));
            }
            return;
        };
        for (k, &atom) in class.iter().enumerate() {
            if k > 0 && self.leaves >= TIE_BREAK_BUDGET {
                break;
            }
            let next = individualise(self.g, &ranks, atom);
            self.explore(next);
        }
    }
}

/// Canonical ranks (a permutation of `0..n`) together with the SMILES they produce.
pub fn canonical_ranking(g: &MolecularGraph) -> (Vec<usize>, String) {
    if g.is_empty() {
        return (Vec::new(), String::new());
    }
    let mut search = Search {
        g,
        leaves: 0,
        best: None,
    };
    search.explore(symmetry_classes(g));
    let (s, r) = search.best.expect("at least one leaf");
    (r, s)
}

/// Canonical SMILES: identical for every atom numbering of the same molecule.
pub fn canonical_smiles(g: &MolecularGraph) -> String {
    canonical_ranking(g).1
}
