use desmiles::chem::{canonical_smiles, parse_smiles, random_smiles, MolecularGraph};
use desmiles::corpus::synthetic_corpus;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Isomorphism by backtracking over atom assignments, comparing atom labels
/// and bond orders. Stereo is ignored, so inputs must be stereo-free.
fn isomorphic(a: &MolecularGraph, b: &MolecularGraph) -> bool {
    let n = a.atom_count();
    if n != b.atom_count() || a.bonds().len() != b.bonds().len() {
        return false;
    }
    let label = |g: &MolecularGraph, i: usize| {
        let at = g.atom(i);
        (at.element, at.formal_charge, at.aromatic, g.total_h_count(i), g.degree(i))
    };
    fn extend(
        a: &MolecularGraph,
        b: &MolecularGraph,
        map: &mut Vec<usize>,
        used: &mut Vec<bool>,
        label: &dyn Fn(&MolecularGraph, usize) -> (desmiles::chem::Element, i8, bool, usize, usize),
    ) -> bool {
        let i = map.len();
        if i == a.atom_count() {
            return true;
        }
        for j in 0..b.atom_count() {
            if used[j] || label(a, i) != label(b, j) {
                continue;
            }
            let consistent = (0..i).all(|k| {
                let ab = a.bond_between(i, k).map(|x| a.bond(x).order);
                let bb = b.bond_between(j, map[k]).map(|x| b.bond(x).order);
                ab == bb
            });
            if consistent {
                map.push(j);
                used[j] = true;
                if extend(a, b, map, used, label) {
                    return true;
                }
                map.pop();
                used[j] = false;
            }
        }
        false
    }
    extend(a, b, &mut Vec::new(), &mut vec![false; n], &label)
}

const SMALL: &[&str] = &[
    "CCCCO", "CCC(C)O", "CC(C)CO", "CC(C)(C)O", "CCOCC", "CCCOC", "CC(C)OC",
    "Cc1ccccc1C", "Cc1cccc(C)c1", "Cc1ccc(C)cc1", "CCc1ccccc1",
    "C1CCCCC1", "CC1CCCC1", "CCC1CCC1", "CC1CCC1C", "C=CCCC=C", "CC=CC=CC",
    "OC1CCNCC1", "NC1CCOCC1", "OCC1CCNC1", "O=C(O)C1CC1", "OC(=O)CC=C",
    "c1ccncc1", "c1ccccn1", "Nc1ccccc1", "Oc1ccccc1N", "Oc1cccc(N)c1", "Oc1ccc(N)cc1",
    "CC(=O)N", "NC(=O)C", "CNC=O", "C[NH3+]", "CC[O-]", "C1CC2CCC1C2", "C1CCC2CC2C1",
];

#[test]
fn canonical_equality_matches_brute_force_isomorphism() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut graphs: Vec<MolecularGraph> = SMALL.iter().map(|s| parse_smiles(s).unwrap()).collect();
    // Respellings of a few entries must land on the same canonical form.
    for k in [0, 7, 18, 25, 33] {
        graphs.push(parse_smiles(&random_smiles(&graphs[k], &mut rng)).unwrap());
    }
    let canon: Vec<String> = graphs.iter().map(canonical_smiles).collect();
    for i in 0..graphs.len() {
        for j in 0..graphs.len() {
            assert_eq!(
                canon[i] == canon[j],
                isomorphic(&graphs[i], &graphs[j]),
                "{} vs {}",
                canon[i],
                canon[j]
            );
        }
    }
}

#[test]
fn canonical_form_is_stable_over_a_corpus() {
    let corpus = synthetic_corpus(1000, 6, 21);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for s in &corpus.smiles {
        let g = parse_smiles(s).unwrap();
        let c = canonical_smiles(&g);
        assert_eq!(canonical_smiles(&parse_smiles(&c).unwrap()), c, "not idempotent: {s}");
        let mut perm: Vec<usize> = (0..g.atom_count()).collect();
        perm.shuffle(&mut rng);
        assert_eq!(canonical_smiles(&g.permuted(&perm)), c, "permutation changed {s}");
        let respelled = random_smiles(&g, &mut rng);
        assert_eq!(canonical_smiles(&parse_smiles(&respelled).unwrap()), c, "respelling {respelled} of {s}");
    }
}

#[test]
fn stereo_is_kept_and_distinguished() {
    let r = canonical_smiles(&parse_smiles("C[C@@H](N)O").unwrap());
    let s = canonical_smiles(&parse_smiles("C[C@H](N)O").unwrap());
    assert_ne!(r, s);
    assert_eq!(r, canonical_smiles(&parse_smiles("N[C@H](C)O").unwrap()));
    let e = canonical_smiles(&parse_smiles("C/C=C/C").unwrap());
    let z = canonical_smiles(&parse_smiles("C/C=C\\C").unwrap());
    assert_ne!(e, z);
    assert_eq!(e, canonical_smiles(&parse_smiles("C\\C=C\\C").unwrap()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn respelling_round_trips(idx in 0usize..SMALL.len(), seed in any::<u64>()) {
        let g = parse_smiles(SMALL[idx]).unwrap();
        let s = random_smiles(&g, &mut ChaCha8Rng::seed_from_u64(seed));
        let back = parse_smiles(&s).unwrap();
        prop_assert!(isomorphic(&g, &back));
        prop_assert_eq!(canonical_smiles(&back), canonical_smiles(&g));
    }
}
