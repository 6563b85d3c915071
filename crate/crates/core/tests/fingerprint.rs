use desmiles::chem::{parse_smiles, random_smiles};
use desmiles::corpus::synthetic_corpus;
use desmiles::fingerprint::{ecfp4, ecfp6, input_fingerprint, tanimoto, BitFingerprint, INPUT_BITS};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn input_is_ecfp4_then_ecfp6() {
    let g = parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap();
    let fp = input_fingerprint(&g);
    assert_eq!(fp.width(), INPUT_BITS);
    assert_eq!(fp.slice(0, 2048), ecfp4(&g));
    assert_eq!(fp.slice(2048, 2048), ecfp6(&g));
}

#[test]
fn respellings_share_a_fingerprint() {
    let corpus = synthetic_corpus(200, 6, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for s in &corpus.smiles {
        let g = parse_smiles(s).unwrap();
        let fp = input_fingerprint(&g);
        for _ in 0..3 {
            let r = random_smiles(&g, &mut rng);
            assert_eq!(input_fingerprint(&parse_smiles(&r).unwrap()), fp, "{s} vs {r}");
        }
    }
}

#[test]
fn stereo_changes_the_fingerprint() {
    let fp = |s: &str| input_fingerprint(&parse_smiles(s).unwrap());
    assert_ne!(fp("C[C@@H](N)C(=O)O"), fp("C[C@H](N)C(=O)O"));
    assert_eq!(fp("C[C@@H](N)C(=O)O"), fp("N[C@H](C)C(=O)O"));
    // Without stereo marks the two enantiomers collapse.
    assert_ne!(fp("CC(N)C(=O)O"), fp("C[C@H](N)C(=O)O"));
}

fn bits(width: usize) -> impl Strategy<Value = BitFingerprint> {
    proptest::collection::vec(0..width, 0..width).prop_map(move |v| BitFingerprint::from_indices(width, v))
}

proptest! {
    #[test]
    fn hex_round_trip(fp in bits(96)) {
        prop_assert_eq!(BitFingerprint::from_hex(&fp.to_hex()).unwrap(), fp);
    }

    #[test]
    fn tanimoto_is_a_similarity(a in bits(70), b in bits(70)) {
        let s = tanimoto(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s, tanimoto(&b, &a).unwrap());
        prop_assert_eq!(tanimoto(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn jaccard_distance_obeys_the_triangle_inequality(a in bits(40), b in bits(40), c in bits(40)) {
        let d = |x: &BitFingerprint, y: &BitFingerprint| 1.0 - tanimoto(x, y).unwrap();
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }

    #[test]
    fn concat_then_slice(a in bits(33), b in bits(65)) {
        let c = a.concat(&b);
        prop_assert_eq!(c.slice(0, 33), a.clone());
        prop_assert_eq!(c.slice(33, 65), b.clone());
        prop_assert_eq!(c.count_ones(), a.count_ones() + b.count_ones());
    }
}
