use std::collections::HashMap;

use desmiles::corpus::synthetic_corpus;
use desmiles::tokenizer::{train_bpe, TokenizerError, Vocabulary, END, FORWARD, REVERSED, SPECIAL_NAMES, START};
use proptest::prelude::*;

/// Straightforward string BPE: recount every adjacent pair each round.
/// Returns the token list and the final segmentation of each training word.
fn naive_bpe(corpus: &[String], vocab_size: usize) -> (Vec<String>, HashMap<String, Vec<String>>) {
    let mut words: Vec<(String, Vec<String>)> = Vec::new();
    for s in corpus {
        for w in [s.clone(), s.chars().rev().collect::<String>()] {
            words.push((w.clone(), w.chars().map(|c| c.to_string()).collect()));
        }
    }
    let mut base: Vec<char> = corpus.iter().flat_map(|s| s.chars()).collect();
    base.sort_unstable();
    base.dedup();
    let mut tokens: Vec<String> = SPECIAL_NAMES.iter().map(|s| s.to_string()).collect();
    tokens.extend(base.iter().map(|c| c.to_string()));
    while tokens.len() < vocab_size {
        let mut counts: HashMap<(String, String), usize> = HashMap::new();
        for (_, w) in &words {
            for p in w.windows(2) {
                *counts.entry((p[0].clone(), p[1].clone())).or_default() += 1;
            }
        }
        let Some(((l, r), _)) = counts
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
        else {
            break;
        };
        let merged = format!("{l}{r}");
        if !tokens.contains(&merged) {
            tokens.push(merged.clone());
        }
        for (_, w) in words.iter_mut() {
            let mut out = Vec::new();
            let mut i = 0;
            while i < w.len() {
                if i + 1 < w.len() && w[i] == l && w[i + 1] == r {
                    out.push(merged.clone());
                    i += 2;
                } else {
                    out.push(w[i].clone());
                    i += 1;
                }
            }
            *w = out;
        }
    }
    (tokens, words.into_iter().collect())
}

fn token_strings(v: &Vocabulary) -> Vec<String> {
    (0..v.len() as u32).map(|i| v.token(i).unwrap().to_string()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn training_matches_naive_bpe(
        corpus in proptest::collection::vec("[CNO=()1c]{1,12}", 1..8),
        extra in 0usize..25,
    ) {
        let distinct: std::collections::HashSet<char> = corpus.iter().flat_map(|s| s.chars()).collect();
        let size = 4 + distinct.len() + extra;
        let v = train_bpe(&corpus, size).unwrap();
        let (tokens, segs) = naive_bpe(&corpus, size);
        prop_assert_eq!(token_strings(&v), tokens);
        for s in &corpus {
            let ids = v.payload_tokens(s, false).unwrap();
            let got: Vec<String> = ids.iter().map(|&i| v.token(i).unwrap().to_string()).collect();
            prop_assert_eq!(&got, &segs[s]);
        }
    }
}

#[test]
fn corpus_round_trips_in_both_directions() {
    let corpus = synthetic_corpus(2000, 6, 13);
    let v = train_bpe(&corpus.smiles, 400).unwrap();
    for s in &corpus.smiles {
        for reversed in [false, true] {
            let t = match v.encode(s, reversed) {
                Ok(t) => t,
                Err(TokenizerError::TooLong(_)) => continue,
                Err(e) => panic!("{s}: {e}"),
            };
            assert_eq!(t.ids[0], START);
            assert_eq!(t.ids[1], if reversed { REVERSED } else { FORWARD });
            assert_eq!(*t.ids.last().unwrap(), END);
            assert_eq!(&v.decode(&t).unwrap(), s);
        }
    }
}

#[test]
fn saved_vocabulary_reloads_identically() {
    let v = train_bpe(&["CCOc1ccccc1", "CC(=O)N"], 30).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vocab.json");
    v.save(&path).unwrap();
    let back = Vocabulary::load(&path).unwrap();
    assert_eq!(back, v);
    assert_eq!(back.content_hash(), v.content_hash());
    assert_eq!(
        back.encode("CCOc1ccccc1", true).unwrap(),
        v.encode("CCOc1ccccc1", true).unwrap()
    );
    let other = train_bpe(&["CCOc1ccccc1", "CC(=O)N"], 29).unwrap();
    assert_ne!(other.content_hash(), v.content_hash());
}
