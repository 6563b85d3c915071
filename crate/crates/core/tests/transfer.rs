use std::collections::HashSet;

use desmiles::chem::parse_smiles;
use desmiles::fingerprint::ecfp4;
use desmiles::search::Candidate;
use desmiles::transfer::{
    build_matched_pairs, evaluate_streams, read_pairs, scorer_by_name, scorer_names, write_pairs, HalogenPresence,
    HashDock, PairConfig, PropertyScorer, RingCount, TransferError,
};

const TEN: &[&str] = &[
    "c1ccccc1",
    "Cc1ccccc1",
    "CCc1ccccc1",
    "c1ccc2ccccc2c1",
    "Cc1ccc2ccccc2c1",
    "C1CCCCC1",
    "CC1CCCCC1",
    "C1CCC2CCCCC2C1",
    "CCCCCC",
    "CCCCCCC",
];

fn set_tanimoto(a: &str, b: &str) -> f64 {
    let bits = |s: &str| ecfp4(&parse_smiles(s).unwrap()).ones().collect::<HashSet<usize>>();
    let (x, y) = (bits(a), bits(b));
    x.intersection(&y).count() as f64 / x.union(&y).count() as f64
}

fn rings(s: &str) -> f64 {
    RingCount.score(&parse_smiles(s).unwrap())
}

/// All (weaker neighbour, parent) pairs over the best `frac` of the list,
/// with the per-parent cap applied to neighbours ranked by similarity then
/// corpus position.
fn oracle_pairs(frac: f64, sim: f64, gap: f64, cap: usize) -> Vec<(String, String)> {
    let mut order: Vec<usize> = (0..TEN.len()).collect();
    order.sort_by(|&a, &b| rings(TEN[b]).partial_cmp(&rings(TEN[a])).unwrap().then(a.cmp(&b)));
    order.truncate((frac * TEN.len() as f64).ceil() as usize);
    let mut out = Vec::new();
    for p in order {
        let parent = TEN[p];
        let mut near: Vec<(f64, usize)> = (0..TEN.len())
            .filter(|&j| j != p)
            .map(|j| (set_tanimoto(parent, TEN[j]), j))
            .filter(|&(s, _)| s >= sim)
            .collect();
        near.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, j) in near.iter().take(cap) {
            if rings(parent) - rings(TEN[j]) >= gap {
                out.push((TEN[j].to_string(), parent.to_string()));
            }
        }
    }
    out.sort();
    out
}

fn built(frac: f64, sim: f64, gap: f64, cap: usize) -> Vec<(String, String)> {
    let corpus: Vec<String> = TEN.iter().map(|s| s.to_string()).collect();
    let config = PairConfig {
        sample_size: corpus.len(),
        top_fraction: frac,
        neighbor_cap: cap,
        sim_threshold: sim,
        gap_threshold: gap,
        seed: 0,
    };
    let mut got: Vec<(String, String)> = build_matched_pairs(&corpus, &RingCount, &config)
        .unwrap()
        .into_iter()
        .map(|p| {
            assert!((p.similarity - set_tanimoto(&p.source_smiles, &p.target_smiles)).abs() < 1e-12);
            (p.source_smiles, p.target_smiles)
        })
        .collect();
    got.sort();
    got
}

#[test]
fn pairs_match_exhaustive_enumeration() {
    assert_eq!(rings("c1ccc2ccccc2c1"), 2.0);
    assert_eq!(rings("CCCCCC"), 0.0);
    for (frac, sim, gap, cap) in [
        (1.0, 0.0, 1.0, 50),
        (1.0, 0.2, 1.0, 50),
        (1.0, 0.1, 1.0, 2),
        (1.0, 0.0, 2.0, 50),
        (0.3, 0.0, 1.0, 50),
        (0.1, 0.1, 1.0, 3),
    ] {
        let expected = oracle_pairs(frac, sim, gap, cap);
        assert!(!expected.is_empty());
        assert_eq!(built(frac, sim, gap, cap), expected, "frac {frac} sim {sim} gap {gap} cap {cap}");
    }
}

#[test]
fn pair_building_rejects_bad_settings() {
    let corpus: Vec<String> = TEN.iter().map(|s| s.to_string()).collect();
    let too_big = PairConfig {
        sample_size: 11,
        ..PairConfig::default()
    };
    assert!(matches!(
        build_matched_pairs(&corpus, &RingCount, &too_big),
        Err(TransferError::InvalidConfig(_))
    ));
    let none = PairConfig {
        sample_size: 10,
        top_fraction: 1.0,
        gap_threshold: 5.0,
        ..PairConfig::default()
    };
    assert!(matches!(build_matched_pairs(&corpus, &RingCount, &none), Err(TransferError::EmptyResult)));
}

#[test]
fn pairs_file_round_trip() {
    let pairs = build_matched_pairs(
        &TEN.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        &RingCount,
        &PairConfig {
            sample_size: 10,
            top_fraction: 0.5,
            sim_threshold: 0.0,
            ..PairConfig::default()
        },
    )
    .unwrap();
    let mut buf = Vec::new();
    write_pairs(&mut buf, &pairs).unwrap();
    let back = read_pairs(&buf[..]).unwrap();
    assert_eq!(back.len(), pairs.len());
    for (a, b) in back.iter().zip(&pairs) {
        assert_eq!((&a.source_smiles, &a.target_smiles), (&b.source_smiles, &b.target_smiles));
        assert!((a.similarity - b.similarity).abs() < 1e-6);
    }
    assert!(matches!(read_pairs(&b"CC\tCCO\n"[..]), Err(TransferError::BadPairsLine(1))));
}

#[test]
fn scorers_by_name() {
    for name in scorer_names() {
        assert_eq!(scorer_by_name(name).unwrap().name(), name);
    }
    assert!(scorer_by_name("qed").is_err());
    let g = |s: &str| parse_smiles(s).unwrap();
    assert_eq!(HalogenPresence.score(&g("Clc1ccccc1")), 1.0);
    assert_eq!(HalogenPresence.score(&g("Oc1ccccc1")), 0.0);
    let dock = HashDock { seed: 1 };
    assert_eq!(dock.score(&g("CCO")), dock.score(&g("OCC")));
    assert!(dock.score(&g("CCO")) < 0.0);
}

fn candidates(list: &[&str]) -> Vec<Candidate> {
    list.iter()
        .enumerate()
        .map(|(i, s)| Candidate {
            smiles: s.to_string(),
            log_prob: -(i as f64),
        })
        .collect()
}

#[test]
fn stream_evaluation_by_hand() {
    let inputs = vec!["Oc1ccccc1".to_string(), "CCCCCCO".to_string()];
    // Input 0: position 2 is a similar halogenated analogue; input 1 never succeeds.
    let streams = vec![
        candidates(&["Oc1ccccc1", "Oc1ccc(Cl)cc1", "Oc1ccccc1Br", "CCl"]),
        candidates(&["CCCCCCN", "ClC(Cl)(Cl)Cl"]),
    ];
    let hal = HalogenPresence;
    let k1 = evaluate_streams(&inputs, &streams, &hal, 0.3, 1).unwrap();
    assert_eq!(k1.success_rate, 0.0);
    assert_eq!(k1.diversity, None);
    let k2 = evaluate_streams(&inputs, &streams, &hal, 0.3, 2).unwrap();
    assert_eq!(k2.success_rate, 0.5);
    assert_eq!(k2.failure_rate, 0.5);
    assert_eq!(k2.per_input[0].first_success, Some(2));
    assert_eq!(k2.diversity, Some(0.0));
    let k3 = evaluate_streams(&inputs, &streams, &hal, 0.3, 3).unwrap();
    let expected = 1.0 - set_tanimoto("Oc1ccc(Cl)cc1", "Oc1ccccc1Br");
    assert!((k3.diversity.unwrap() - expected).abs() < 1e-12);
    assert!(evaluate_streams(&inputs, &streams, &hal, 0.3, 0).is_err());
}
