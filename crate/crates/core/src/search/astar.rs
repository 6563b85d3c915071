//! Best-first enumeration of the token tree in order of sequence probability.
//!
//! Priority is `g(x) = −log p(x)` with a zero heuristic, so leaves come out
//! in non-decreasing `g`. Children of an expanded node are sorted once and
//! enqueued lazily: only the best child is pushed at expansion time, and
//! popping a child pushes its next sibling. The pop order is the same as if
//! every child had been pushed.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use super::{Candidate, SearchBudget, StateMemory};
use crate::chem::{canonical_smiles, parse_smiles};
use crate::fingerprint::BitFingerprint;
use crate::net::{DecoderState, ModelParameters, NetError};
use crate::tokenizer::{Vocabulary, END, START};

/// A complete path popped from the queue, valid or not.
#[derive(Debug, Clone, PartialEq)]
pub struct RawLeaf {
    /// Token path beginning with START.
    pub tokens: Vec<u32>,
    pub g: f64,
}

struct Entry {
    g: f64,
    path: Vec<u32>,
    /// Expansion that produced this node and its rank among the siblings.
    parent: Option<(usize, usize)>,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    /// Reversed so that the max-heap pops the smallest `g`, then the
    /// lexicographically smallest path.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .g
            .total_cmp(&self.g)
            .then_with(|| other.path.cmp(&self.path))
    }
}

struct Expansion {
    g: f64,
    /// `(log p, token)`, most probable first, ties by token id.
    children: Vec<(f64, u32)>,
    /// Decoder state after the expanded node's path.
    state: Option<DecoderState>,
}

/// Lazily evaluated A* stream for one start state.
pub struct AStar<'a> {
    params: &'a ModelParameters,
    vocab: &'a Vocabulary,
    budget: SearchBudget,
    memory: StateMemory,
    init: DecoderState,
    queue: BinaryHeap<Entry>,
    expansions: Vec<Expansion>,
    branches: usize,
    leaves: usize,
    seen: HashSet<String>,
    emitted: usize,
}

impl<'a> AStar<'a> {
    pub fn new(
        params: &'a ModelParameters,
        vocab: &'a Vocabulary,
        init: DecoderState,
        budget: SearchBudget,
        memory: StateMemory,
    ) -> AStar<'a> {
        let mut queue = BinaryHeap::new();
        queue.push(Entry {
            g: 0.0,
            path: vec![START],
            parent: None,
        });
        AStar {
            params,
            vocab,
            budget,
            memory,
            init,
            queue,
            expansions: Vec::new(),
            branches: 0,
            leaves: 0,
            seen: HashSet::new(),
            emitted: 0,
        }
    }

    pub fn from_fingerprint(
        params: &'a ModelParameters,
        vocab: &'a Vocabulary,
        fp: &BitFingerprint,
        budget: SearchBudget,
        memory: StateMemory,
    ) -> Result<AStar<'a>, NetError> {
        let (_, init) = params.encode_fingerprint(fp)?;
        Ok(AStar::new(params, vocab, init, budget, memory))
    }

    /// Expansions performed so far.
    pub fn branches(&self) -> usize {
        self.branches
    }

    /// Leaves popped so far, valid or not.
    pub fn leaves(&self) -> usize {
        self.leaves
    }

    /// Valid, distinct molecules emitted so far.
    pub fn emitted(&self) -> usize {
        self.emitted
    }

    fn is_leaf(&self, path: &[u32]) -> bool {
        *path.last().unwrap() == END || path.len() > self.budget.max_payload_tokens + 2
    }

    /// State after consuming `prefix` (which starts with START) from scratch.
    fn replay(&self, prefix: &[u32]) -> Result<DecoderState, NetError> {
        let mut st = self.init.clone();
        for &t in prefix {
            st = self.params.decoder_step(&st, t)?.1;
        }
        Ok(st)
    }

    fn expand(&mut self, node: &Entry) -> Result<(), NetError> {
        let before = match (node.parent, self.memory) {
            (None, _) => self.init.clone(),
            (Some((pe, _)), StateMemory::Keep) => self.expansions[pe]
                .state
                .clone()
                .expect("kept state"),
            (Some(_), StateMemory::Recompute) => self.replay(&node.path[..node.path.len() - 1])?,
        };
        let (lp, after) = self.params.decoder_step(&before, *node.path.last().unwrap())?;
        let mut children: Vec<(f64, u32)> = lp.into_iter().enumerate().map(|(t, l)| (l, t as u32)).collect();
        children.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let idx = self.expansions.len();
        let (best_lp, best_tok) = children[0];
        self.expansions.push(Expansion {
            g: node.g,
            children,
            state: match self.memory {
                StateMemory::Keep => Some(after),
                StateMemory::Recompute => None,
            },
        });
        let mut path = node.path.clone();
        path.push(best_tok);
        self.queue.push(Entry {
            g: node.g - best_lp,
            path,
            parent: Some((idx, 0)),
        });
        self.branches += 1;
        Ok(())
    }

    /// The next leaf in order of increasing `g`, or `None` once the queue is
    /// empty or the leaf budget is spent.
    pub fn next_leaf(&mut self) -> Result<Option<RawLeaf>, NetError> {
        while self.leaves < self.budget.max_leaves {
            let Some(node) = self.queue.pop() else {
                return Ok(None);
            };
            if let Some((pe, rank)) = node.parent {
                let exp = &self.expansions[pe];
                if let Some(&(lp, tok)) = exp.children.get(rank + 1) {
                    let mut path = node.path.clone();
                    *path.last_mut().unwrap() = tok;
                    self.queue.push(Entry {
                        g: exp.g - lp,
                        path,
                        parent: Some((pe, rank + 1)),
                    });
                }
            }
            if self.is_leaf(&node.path) {
                self.leaves += 1;
                return Ok(Some(RawLeaf {
                    tokens: node.path,
                    g: node.g,
                }));
            }
            if self.branches < self.budget.max_branches {
                self.expand(&node)?;
            }
        }
        Ok(None)
    }

    /// The next leaf that decodes to a valid molecule not emitted before.
    pub fn next_molecule(&mut self) -> Result<Option<Candidate>, NetError> {
        while let Some(leaf) = self.next_leaf()? {
            if let Some(smiles) = decode_leaf(self.vocab, &leaf.tokens) {
                if self.seen.insert(smiles.clone()) {
                    self.emitted += 1;
                    return Ok(Some(Candidate {
                        smiles,
                        log_prob: -leaf.g,
                    }));
                }
            }
        }
        Ok(None)
    }
}

/// Canonical SMILES of a complete token path, if it is a valid molecule.
pub fn decode_leaf(vocab: &Vocabulary, tokens: &[u32]) -> Option<String> {
    let text = vocab.decode_ids(tokens).ok()?;
    if text.is_empty() {
        return None;
    }
    let g = parse_smiles(&text).ok()?;
    Some(canonical_smiles(&g))
}
