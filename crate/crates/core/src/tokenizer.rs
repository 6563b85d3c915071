//! Byte-pair-encoding vocabulary over SMILES characters, with the four
//! structural tokens and forward/reversed direction control.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const START: u32 = 0;
pub const FORWARD: u32 = 1;
pub const REVERSED: u32 = 2;
pub const END: u32 = 3;
pub const SPECIAL_COUNT: usize = 4;
pub const SPECIAL_NAMES: [&str; SPECIAL_COUNT] = ["<start>", "<forward>", "<reversed>", "<end>"];
/// Longest payload (tokens between the direction token and END) accepted.
pub const MAX_PAYLOAD_TOKENS: usize = 27;
pub const DEFAULT_VOCAB_SIZE: usize = 8000;
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("vocabulary size {requested} is below the {minimum} base and special tokens")]
    VocabTooSmall { requested: usize, minimum: usize },
    #[error("character {0:?} is not in the vocabulary")]
    UnknownCharacter(char),
    #[error("payload of {0} tokens exceeds the limit of {MAX_PAYLOAD_TOKENS}")]
    TooLong(usize),
    #[error("malformed token sequence: {0}")]
    MalformedSequence(&'static str),
    #[error("invalid vocabulary file: {0}")]
    InvalidFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub reversed: bool,
}

impl TokenSequence {
    pub fn payload(&self) -> &[u32] {
        &self.ids[2..self.ids.len() - 1]
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct VocabFile {
    format_version: u32,
    vocab_size: usize,
    specials: Vec<String>,
    base_chars: Vec<String>,
    merges: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    char_ids: HashMap<char, u32>,
    base_chars: Vec<char>,
    /// (left, right) in training order.
    merges: Vec<(u32, u32)>,
    /// (left, right) -> (rank, merged id)
    merge_rank: HashMap<(u32, u32), (usize, u32)>,
    exhausted: bool,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens && self.merges == other.merges
    }
}

impl Vocabulary {
    fn with_base(base_chars: Vec<char>) -> Self {
        let mut v = Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
            char_ids: HashMap::new(),
            base_chars: Vec::new(),
            merges: Vec::new(),
            merge_rank: HashMap::new(),
            exhausted: false,
        };
        for s in SPECIAL_NAMES {
            v.push_token(s.to_string());
        }
        for &c in &base_chars {
            let id = v.push_token(c.to_string());
            v.char_ids.insert(c, id);
        }
        v.base_chars = base_chars;
        v
    }

    fn push_token(&mut self, s: String) -> u32 {
        let id = self.tokens.len() as u32;
        self.index.insert(s.clone(), id);
        self.tokens.push(s);
        id
    }

    /// Records a merge; returns whether it introduced a new token string.
    fn add_merge(&mut self, left: u32, right: u32) -> bool {
        let s = format!("{}{}", self.tokens[left as usize], self.tokens[right as usize]);
        let (id, new) = match self.index.get(&s) {
            Some(&id) => (id, false),
            None => (self.push_token(s), true),
        };
        self.merge_rank.insert((left, right), (self.merges.len(), id));
        self.merges.push((left, right));
        new
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn base_chars(&self) -> &[char] {
        &self.base_chars
    }

    pub fn merge_count(&self) -> usize {
        self.merges.len()
    }

    /// True when training ran out of pairs before reaching the requested size.
    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn is_special(id: u32) -> bool {
        (id as usize) < SPECIAL_COUNT
    }

    fn segment(&self, text: &str) -> Result<Vec<u32>, TokenizerError> {
        let mut sym: Vec<u32> = text
            .chars()
            .map(|c| {
                self.char_ids
                    .get(&c)
                    .copied()
                    .ok_or(TokenizerError::UnknownCharacter(c))
            })
            .collect::<Result<_, _>>()?;
        loop {
            let best = sym
                .windows(2)
                .filter_map(|w| self.merge_rank.get(&(w[0], w[1])).map(|&(r, _)| (r, w[0], w[1])))
                .min();
            let Some((_, l, r)) = best else { break };
            let merged = self.merge_rank[&(l, r)].1;
            let mut out = Vec::with_capacity(sym.len());
            let mut i = 0;
            while i < sym.len() {
                if i + 1 < sym.len() && sym[i] == l && sym[i + 1] == r {
                    out.push(merged);
                    i += 2;
                } else {
                    out.push(sym[i]);
                    i += 1;
                }
            }
            sym = out;
        }
        Ok(sym)
    }

    /// Payload tokens for `smiles` in the given direction, without a length cap.
    pub fn payload_tokens(&self, smiles: &str, reversed: bool) -> Result<Vec<u32>, TokenizerError> {
        if reversed {
            self.segment(&smiles.chars().rev().collect::<String>())
        } else {
            self.segment(smiles)
        }
    }

    /// `[START, FORWARD|REVERSED, payload…, END]`; fails with `TooLong` past
    /// [`MAX_PAYLOAD_TOKENS`] payload tokens.
    pub fn encode(&self, smiles: &str, reversed: bool) -> Result<TokenSequence, TokenizerError> {
        let payload = self.payload_tokens(smiles, reversed)?;
        if payload.len() > MAX_PAYLOAD_TOKENS {
            return Err(TokenizerError::TooLong(payload.len()));
        }
        let mut ids = Vec::with_capacity(payload.len() + 3);
        ids.push(START);
        ids.push(if reversed { REVERSED } else { FORWARD });
        ids.extend(payload);
        ids.push(END);
        Ok(TokenSequence { ids, reversed })
    }

    /// Forward-direction text of a complete sequence. No chemistry check.
    pub fn decode(&self, t: &TokenSequence) -> Result<String, TokenizerError> {
        self.decode_ids(&t.ids)
    }

    pub fn decode_ids(&self, ids: &[u32]) -> Result<String, TokenizerError> {
        if ids.len() < 3 || ids[0] != START {
            return Err(TokenizerError::MalformedSequence("missing start"));
        }
        let reversed = match ids[1] {
            FORWARD => false,
            REVERSED => true,
            _ => return Err(TokenizerError::MalformedSequence("missing direction")),
        };
        if *ids.last().unwrap() != END {
            return Err(TokenizerError::MalformedSequence("missing end"));
        }
        let mut s = String::new();
        for &id in &ids[2..ids.len() - 1] {
            if Self::is_special(id) {
                return Err(TokenizerError::MalformedSequence("special token in payload"));
            }
            s.push_str(
                self.token(id)
                    .ok_or(TokenizerError::MalformedSequence("unknown token id"))?,
            );
        }
        if reversed {
            s = s.chars().rev().collect();
        }
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        let file = VocabFile {
            format_version: FORMAT_VERSION,
            vocab_size: self.len(),
            specials: SPECIAL_NAMES.iter().map(|s| s.to_string()).collect(),
            base_chars: self.base_chars.iter().map(|c| c.to_string()).collect(),
            merges: self
                .merges
                .iter()
                .map(|&(l, r)| (self.tokens[l as usize].clone(), self.tokens[r as usize].clone()))
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("vocabulary serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Vocabulary, TokenizerError> {
        let bad = |m: String| TokenizerError::InvalidFile(m);
        let file: VocabFile = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if file.format_version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format_version {}", file.format_version)));
        }
        if file.specials != SPECIAL_NAMES {
            return Err(bad("special tokens differ".into()));
        }
        let mut base = Vec::new();
        for s in &file.base_chars {
            let mut it = s.chars();
            match (it.next(), it.next()) {
                (Some(c), None) => base.push(c),
                _ => return Err(bad(format!("base character {s:?} is not one character"))),
            }
        }
        let mut v = Vocabulary::with_base(base);
        for (l, r) in &file.merges {
            let (Some(li), Some(ri)) = (v.id_of(l), v.id_of(r)) else {
                return Err(bad(format!("merge ({l:?}, {r:?}) uses unknown tokens")));
            };
            v.add_merge(li, ri);
        }
        if v.len() != file.vocab_size {
            return Err(bad(format!("vocab_size {} but {} tokens rebuilt", file.vocab_size, v.len())));
        }
        Ok(v)
    }

    pub fn save(&self, path: &Path) -> Result<(), TokenizerError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Vocabulary, TokenizerError> {
        Vocabulary::from_json(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the serialized vocabulary, hex encoded.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Trains a BPE vocabulary of `vocab_size` tokens. Every string contributes
/// both its forward and character-reversed spelling. The most frequent
/// adjacent pair is merged first; equal counts go to the lexicographically
/// smaller `(left, right)` string pair.
///
/// When the corpus runs out of pairs first, the smaller vocabulary is
/// returned with [`Vocabulary::exhausted`] set.
pub fn train_bpe<S: AsRef<str>>(corpus: &[S], vocab_size: usize) -> Result<Vocabulary, TokenizerError> {
    if corpus.is_empty() {
        return Err(TokenizerError::EmptyCorpus);
    }
    let mut word_counts: HashMap<String, i64> = HashMap::new();
    for s in corpus {
        let s = s.as_ref();
        *word_counts.entry(s.to_string()).or_default() += 1;
        *word_counts.entry(s.chars().rev().collect()).or_default() += 1;
    }
    let mut base: Vec<char> = word_counts
        .keys()
        .flat_map(|w| w.chars())
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    base.sort_unstable();
    let minimum = SPECIAL_COUNT + base.len();
    if vocab_size < minimum {
        return Err(TokenizerError::VocabTooSmall {
            requested: vocab_size,
            minimum,
        });
    }
    let mut v = Vocabulary::with_base(base);

    let mut entries: Vec<(String, i64)> = word_counts.into_iter().collect();
    entries.sort_unstable();
    let mut words: Vec<Vec<u32>> = entries
        .iter()
        .map(|(w, _)| w.chars().map(|c| v.char_ids[&c]).collect())
        .collect();
    let freq: Vec<i64> = entries.iter().map(|e| e.1).collect();

    let mut pair_counts: HashMap<(u32, u32), i64> = HashMap::new();
    let mut holders: HashMap<(u32, u32), HashSet<usize>> = HashMap::new();
    for (wi, w) in words.iter().enumerate() {
        for p in w.windows(2) {
            *pair_counts.entry((p[0], p[1])).or_default() += freq[wi];
            holders.entry((p[0], p[1])).or_default().insert(wi);
        }
    }

    while v.len() < vocab_size {
        let best = pair_counts
            .iter()
            .filter(|&(_, &c)| c > 0)
            .max_by(|a, b| {
                a.1.cmp(b.1).then_with(|| {
                    let ka = (&v.tokens[a.0 .0 as usize], &v.tokens[a.0 .1 as usize]);
                    let kb = (&v.tokens[b.0 .0 as usize], &v.tokens[b.0 .1 as usize]);
                    kb.cmp(&ka)
                })
            })
            .map(|(&p, _)| p);
        let Some((l, r)) = best else {
            log::warn!(
                "corpus exhausted after {} merges; vocabulary has {} of {} tokens",
                v.merges.len(),
                v.len(),
                vocab_size
            );
            v.exhausted = true;
            break;
        };
        v.add_merge(l, r);
        let merged = v.merge_rank[&(l, r)].1;
        let mut affected: Vec<usize> = holders.remove(&(l, r)).unwrap_or_default().into_iter().collect();
        affected.sort_unstable();
        for wi in affected {
            let f = freq[wi];
            let w = &words[wi];
            for p in w.windows(2) {
                *pair_counts.get_mut(&(p[0], p[1])).unwrap() -= f;
            }
            let mut out = Vec::with_capacity(w.len());
            let mut i = 0;
            while i < w.len() {
                if i + 1 < w.len() && w[i] == l && w[i + 1] == r {
                    out.push(merged);
                    i += 2;
                } else {
                    out.push(w[i]);
                    i += 1;
                }
            }
            for p in out.windows(2) {
                *pair_counts.entry((p[0], p[1])).or_default() += f;
                holders.entry((p[0], p[1])).or_default().insert(wi);
            }
            words[wi] = out;
        }
        pair_counts.remove(&(l, r));
    }
    Ok(v)
}
