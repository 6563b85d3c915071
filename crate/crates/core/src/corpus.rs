//! Corpus files, standardisation/filtering, and a seeded generator of
//! drug-like molecule series for desk-scale experiments.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chem::{
    canonical_smiles, largest_fragment, parse_smiles, passes_drug_filter, Atom, Bond, BondOrder,
    Chirality, DoubleBondStereo, MolecularGraph,
};
use crate::tokenizer::{TokenizerError, Vocabulary};

/// Non-comment lines of a SMILES file, trailing whitespace removed, blank
/// lines skipped.
pub fn read_smiles_file(path: &Path) -> std::io::Result<Vec<String>> {
    Ok(parse_smiles_lines(&std::fs::read_to_string(path)?))
}

pub fn parse_smiles_lines(text: &str) -> Vec<String> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.trim_end().to_string())
        .filter(|l| !l.is_empty())
        .collect()
}

pub fn write_smiles_file(path: &Path, smiles: &[String]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for s in smiles {
        writeln!(out, "{s}")?;
    }
    out.flush()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterReport {
    /// Canonical SMILES of the largest fragment, in first-seen order.
    pub kept: Vec<String>,
    pub unparsable: usize,
    pub rejected: usize,
    pub duplicates: usize,
}

/// Parses each line, keeps the largest fragment, applies the drug filter and
/// removes canonical duplicates.
pub fn filter_corpus(lines: &[String]) -> FilterReport {
    let mut report = FilterReport::default();
    let mut seen = HashSet::new();
    for line in lines {
        let Ok(g) = parse_smiles(line) else {
            report.unparsable += 1;
            continue;
        };
        let frag = largest_fragment(&g);
        if !passes_drug_filter(&frag) {
            report.rejected += 1;
            continue;
        }
        let s = canonical_smiles(&frag);
        if seen.insert(s.clone()) {
            report.kept.push(s);
        } else {
            report.duplicates += 1;
        }
    }
    report
}

/// Molecules whose payload fits the token cap in both directions, and the
/// fraction that did.
pub fn within_token_cap(vocab: &Vocabulary, smiles: &[String]) -> (Vec<String>, f64) {
    let kept: Vec<String> = smiles
        .iter()
        .filter(|s| {
            [false, true].iter().all(|&rev| match vocab.encode(s, rev) {
                Ok(_) => true,
                Err(TokenizerError::TooLong(_)) | Err(TokenizerError::UnknownCharacter(_)) => false,
                Err(_) => false,
            })
        })
        .cloned()
        .collect();
    let frac = if smiles.is_empty() {
        0.0
    } else {
        kept.len() as f64 / smiles.len() as f64
    };
    (kept, frac)
}

/// A graph with the atoms where a new bond may be made.
#[derive(Debug, Clone)]
struct Fragment {
    graph: MolecularGraph,
    sites: Vec<usize>,
}

impl Fragment {
    fn parse(smiles: &str, sites: Option<&[usize]>) -> Fragment {
        let graph = parse_smiles(smiles).expect("built-in fragment parses");
        let sites = match sites {
            Some(s) => s.to_vec(),
            None => (0..graph.atom_count())
                .filter(|&i| {
                    let a = graph.atom(i);
                    a.explicit_h_count > 0 && a.chirality == Chirality::None
                })
                .collect(),
        };
        Fragment { graph, sites }
    }
}

/// Bonds `b`'s atom `b_site` to `a`'s atom `a_site` with a single bond.
/// `a_site` stops being a site; `b`'s sites are kept on request.
fn join(a: &Fragment, a_site: usize, b: &Fragment, b_site: usize, keep_b_sites: bool) -> Fragment {
    let off = a.graph.atom_count();
    let mut atoms: Vec<Atom> = a.graph.atoms().to_vec();
    atoms.extend(b.graph.atoms().iter().cloned());
    atoms[a_site].explicit_h_count -= 1;
    atoms[off + b_site].explicit_h_count -= 1;
    let mut bonds: Vec<Bond> = a.graph.bonds().to_vec();
    bonds.extend(b.graph.bonds().iter().map(|bd| Bond {
        a: bd.a + off,
        b: bd.b + off,
        order: bd.order,
        stereo: bd.stereo.map(|s| DoubleBondStereo {
            ref_a: s.ref_a + off,
            ref_b: s.ref_b + off,
            cis: s.cis,
        }),
    }));
    bonds.push(Bond::new(a_site, off + b_site, BondOrder::Single));
    let graph = MolecularGraph::new(atoms, bonds).expect("joined fragments form a valid graph");
    let mut sites: Vec<usize> = a.sites.iter().copied().filter(|&s| s != a_site).collect();
    if keep_b_sites {
        sites.extend(b.sites.iter().map(|s| s + off));
    }
    sites.retain(|&s| graph.atom(s).explicit_h_count > 0);
    Fragment { graph, sites }
}

const CORES: &[&str] = &[
    "c1ccccc1",
    "c1ccncc1",
    "c1ccoc1",
    "c1ccsc1",
    "c1cncnc1",
    "C1CCNCC1",
    "C1CCCCC1",
    "C1CCOC1",
    "C1CC1",
    "C1CNCCN1",
    "c1ccc2ccccc2c1",
    "O=C1CCCN1",
    "c1cn[nH]c1",
];

/// (SMILES, head atom, tail atom)
const LINKERS: &[(&str, usize, usize)] = &[
    ("C", 0, 0),
    ("CC", 0, 1),
    ("NC=O", 0, 1),
    ("O=CN", 1, 2),
    ("O", 0, 0),
    ("N", 0, 0),
    ("CO", 0, 1),
    ("CN", 0, 1),
    ("C/C=C/C", 0, 3),
    ("NS(=O)=O", 0, 1),
];

/// Substituents, attached through their first atom.
const SUBSTITUENTS: &[&str] = &[
    "C", "CC", "CCC", "CC(C)C", "F", "Cl", "Br", "O", "OC", "N", "NC", "C(F)(F)F", "C#N", "OC=O",
    "NC=O", "CC=O", "C[C@@H](C)O", "C[C@H](C)O", "C[C@@H](N)C", "OCC", "CN(C)C",
];

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    /// Canonical SMILES, deduplicated, each passing the drug filter.
    pub smiles: Vec<String>,
    /// Series index of each molecule; members of a series share a scaffold.
    pub series: Vec<usize>,
}

/// `n` distinct molecules in series of up to `max_series` analogues sharing a
/// scaffold (one or two ring systems, optionally linked) and differing in up
/// to three substituents.
pub fn synthetic_corpus(n: usize, max_series: usize, seed: u64) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cores: Vec<Fragment> = CORES.iter().map(|s| Fragment::parse(s, None)).collect();
    let linkers: Vec<(Fragment, usize)> = LINKERS
        .iter()
        .map(|&(s, head, tail)| (Fragment::parse(s, Some(&[tail])), head))
        .collect();
    let subs: Vec<Fragment> = SUBSTITUENTS
        .iter()
        .map(|s| Fragment::parse(s, Some(&[])))
        .collect();

    let mut seen = HashSet::new();
    let mut out = SyntheticCorpus {
        smiles: Vec::new(),
        series: Vec::new(),
    };
    let mut series = 0;
    let mut attempts = 0;
    while out.smiles.len() < n {
        attempts += 1;
        assert!(attempts < 100 * n + 1000, "generator failed to find {n} distinct molecules");
        let mut scaffold = cores.choose(&mut rng).unwrap().clone();
        if rng.random_bool(0.6) {
            let (linker, head) = linkers.choose(&mut rng).unwrap();
            let site = *scaffold.sites.choose(&mut rng).unwrap();
            scaffold = join(&scaffold, site, linker, *head, true);
            let other = cores.choose(&mut rng).unwrap();
            let tail = *scaffold.sites.last().unwrap();
            let other_site = *other.sites.choose(&mut rng).unwrap();
            let mut joined = join(&scaffold, tail, other, other_site, true);
            joined.sites.retain(|&s| s != tail);
            scaffold = joined;
        }
        let members = rng.random_range(1..=max_series.max(1));
        for _ in 0..members {
            let mut mol = scaffold.clone();
            let k = rng.random_range(0..=3usize);
            for _ in 0..k {
                if mol.sites.is_empty() {
                    break;
                }
                let site = *mol.sites.choose(&mut rng).unwrap();
                let sub = subs.choose(&mut rng).unwrap();
                mol = join(&mol, site, sub, 0, false);
            }
            if !passes_drug_filter(&mol.graph) {
                continue;
            }
            let s = canonical_smiles(&mol.graph);
            if seen.insert(s.clone()) {
                out.smiles.push(s);
                out.series.push(series);
                if out.smiles.len() == n {
                    break;
                }
            }
        }
        series += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_lines() {
        let lines = parse_smiles_lines("# header\nCCO  \n\nc1ccccc1\t\n#C\n");
        assert_eq!(lines, vec!["CCO", "c1ccccc1"]);
    }

    #[test]
    fn filtering() {
        let lines: Vec<String> = ["CCO.Cl", "OCC", "C[Si](C)C", "C(C"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let r = filter_corpus(&lines);
        assert_eq!(r.kept, vec![canonical_smiles(&parse_smiles("CCO").unwrap())]);
        assert_eq!((r.unparsable, r.rejected, r.duplicates), (1, 1, 1));
    }

    #[test]
    fn synthetic_molecules_are_valid_and_seeded() {
        let a = synthetic_corpus(200, 6, 3);
        let b = synthetic_corpus(200, 6, 3);
        assert_eq!(a.smiles, b.smiles);
        assert_eq!(a.smiles.len(), 200);
        let halogenated = a.smiles.iter().filter(|s| s.contains('F') || s.contains("Cl") || s.contains("Br")).count();
        assert!(halogenated > 20 && halogenated < 180);
        for s in &a.smiles {
            let g = parse_smiles(s).unwrap();
            assert_eq!(&canonical_smiles(&g), s);
            assert!(passes_drug_filter(&g));
        }
    }
}
