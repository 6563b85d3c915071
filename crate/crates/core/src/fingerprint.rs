//! Extended-connectivity (Morgan) fingerprints folded into fixed-width bit
//! vectors, and Tanimoto similarity.
//!
//! Identifiers are 32-bit MurmurHash3 digests (seed [`HASH_SEED`]) of the
//! integer invariant tuples, so fingerprints are identical on every platform.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::chem::{symmetry_classes, Chirality, Element, Ligand, MolecularGraph};

pub const HASH_SEED: u32 = 0x5EED_EC4F;
/// Width of each ECFP component of the model input.
pub const COMPONENT_BITS: usize = 2048;
/// Width of the model input (ECFP4 followed by ECFP6).
pub const INPUT_BITS: usize = 2 * COMPONENT_BITS;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FingerprintError {
    #[error("fingerprint widths differ: {0} vs {1}")]
    WidthMismatch(usize, usize),
    #[error("invalid hex fingerprint: {0}")]
    InvalidHex(String),
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitFingerprint {
    width: usize,
    words: Vec<u64>,
}

impl BitFingerprint {
    pub fn zeros(width: usize) -> Self {
        assert!(width > 0, "fingerprint width must be positive");
        BitFingerprint {
            width,
            words: vec![0; width.div_ceil(64)],
        }
    }

    pub fn from_indices(width: usize, bits: impl IntoIterator<Item = usize>) -> Self {
        let mut fp = Self::zeros(width);
        for b in bits {
            fp.set(b);
        }
        fp
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn set(&mut self, bit: usize) {
        assert!(bit < self.width);
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        bit < self.width && self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + t)
            })
        })
    }

    pub fn concat(&self, other: &BitFingerprint) -> BitFingerprint {
        let mut out = BitFingerprint::zeros(self.width + other.width);
        for b in self.ones() {
            out.set(b);
        }
        for b in other.ones() {
            out.set(self.width + b);
        }
        out
    }

    /// Bits `[start, start + width)` as a new fingerprint.
    pub fn slice(&self, start: usize, width: usize) -> BitFingerprint {
        BitFingerprint::from_indices(
            width,
            self.ones()
                .filter(|&b| b >= start && b < start + width)
                .map(|b| b - start),
        )
    }

    fn check_width(&self, other: &BitFingerprint) -> Result<(), FingerprintError> {
        if self.width != other.width {
            return Err(FingerprintError::WidthMismatch(self.width, other.width));
        }
        Ok(())
    }

    pub fn intersection_count(&self, other: &BitFingerprint) -> Result<usize, FingerprintError> {
        self.check_width(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum())
    }

    pub fn union_count(&self, other: &BitFingerprint) -> Result<usize, FingerprintError> {
        self.check_width(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum())
    }

    /// Lowercase hex, `width / 4` characters. Nibble `k` holds bits
    /// `4k..4k+4`, with bit `4k` as its most significant bit.
    pub fn to_hex(&self) -> String {
        (0..self.width.div_ceil(4))
            .map(|k| {
                let v = (0..4).fold(0u32, |acc, j| {
                    (acc << 1) | self.get(4 * k + j) as u32
                });
                char::from_digit(v, 16).unwrap()
            })
            .collect()
    }

    pub fn from_hex(hex: &str) -> Result<BitFingerprint, FingerprintError> {
        if hex.is_empty() {
            return Err(FingerprintError::InvalidHex(hex.to_string()));
        }
        let mut fp = BitFingerprint::zeros(hex.len() * 4);
        for (k, c) in hex.chars().enumerate() {
            let v = c
                .to_digit(16)
                .filter(|_| !c.is_ascii_uppercase())
                .ok_or_else(|| FingerprintError::InvalidHex(hex.to_string()))?;
            for j in 0..4 {
                if v >> (3 - j) & 1 == 1 {
                    fp.set(4 * k + j);
                }
            }
        }
        Ok(fp)
    }

    /// Dense 0/1 view, used as network input.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.width];
        for b in self.ones() {
            v[b] = 1.0;
        }
        v
    }
}

impl fmt::Debug for BitFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitFingerprint({}; {:?})", self.width, self.ones().collect::<Vec<_>>())
    }
}

/// `|a ∧ b| / |a ∨ b|`, with 1.0 for two empty vectors.
pub fn tanimoto(a: &BitFingerprint, b: &BitFingerprint) -> Result<f64, FingerprintError> {
    let union = a.union_count(b)?;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(a.intersection_count(b)? as f64 / union as f64)
}

/// MurmurHash3 (x86, 32-bit) over a sequence of 32-bit words.
pub fn hash_words(words: &[u32]) -> u32 {
    const C1: u32 = 0xcc9e_2d51;
    const C2: u32 = 0x1b87_3593;
    let mut h = HASH_SEED;
    for &w in words {
        let k = w.wrapping_mul(C1).rotate_left(15).wrapping_mul(C2);
        h ^= k;
        h = h.rotate_left(13).wrapping_mul(5).wrapping_add(0xe654_6b64);
    }
    h ^= (words.len() * 4) as u32;
    h ^= h >> 16;
    h = h.wrapping_mul(0x85eb_ca6b);
    h ^= h >> 13;
    h = h.wrapping_mul(0xc2b2_ae35);
    h ^= h >> 16;
    h
}

/// Stereo flag for a tetrahedral centre: 0 when unspecified or when two
/// ligands are symmetry-equivalent, otherwise 1 or 2 by handedness relative
/// to the symmetry-class order of the ligands.
fn stereo_flags(g: &MolecularGraph) -> Vec<u32> {
    let chiral: Vec<usize> = (0..g.atom_count())
        .filter(|&i| g.atom(i).chirality != Chirality::None)
        .collect();
    let mut flags = vec![0; g.atom_count()];
    if chiral.is_empty() {
        return flags;
    }
    let classes = symmetry_classes(g);
    for i in chiral {
        let reference = g.reference_ligands(i);
        let key = |l: &Ligand| match *l {
            Ligand::Hydrogen => 0,
            Ligand::Atom(n) => classes[n] + 1,
        };
        let mut sorted = reference.clone();
        sorted.sort_by_key(key);
        if sorted.windows(2).any(|w| key(&w[0]) == key(&w[1])) {
            continue;
        }
        let odd = crate::chem::permutation_is_odd(&reference, &sorted);
        flags[i] = match g.atom(i).chirality.flip_if(odd) {
            Chirality::CounterClockwise => 1,
            _ => 2,
        };
    }
    flags
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct BondSet(Vec<u64>);

impl BondSet {
    fn new(n: usize) -> Self {
        BondSet(vec![0; n.div_ceil(64).max(1)])
    }
    fn insert(&mut self, b: usize) {
        self.0[b / 64] |= 1 << (b % 64);
    }
    fn union_with(&mut self, other: &BondSet) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a |= b;
        }
    }
}

/// Distinct ECFP identifiers up to `radius`, in generation order.
///
/// Round 0 hashes (element, heavy degree, attached H, charge, ring flag,
/// aromatic flag[, stereo flag]). Each later round hashes the round number,
/// the atom's previous identifier, and its neighbours' sorted
/// `(bond order, identifier)` pairs. An identifier whose covered bond set
/// duplicates an earlier one is dropped.
pub fn morgan_identifiers(g: &MolecularGraph, radius: usize, use_chirality: bool) -> Vec<u32> {
    let heavy: Vec<usize> = (0..g.atom_count())
        .filter(|&i| g.atom(i).element != Element::H)
        .collect();
    let rings = g.smallest_atom_rings();
    let stereo = if use_chirality {
        stereo_flags(g)
    } else {
        vec![0; g.atom_count()]
    };
    let mut ids = vec![0u32; g.atom_count()];
    for &i in &heavy {
        let a = g.atom(i);
        let mut inv = vec![
            a.element.atomic_number() as u32,
            g.heavy_degree(i) as u32,
            g.total_h_count(i) as u32,
            a.formal_charge as i32 as u32,
            rings[i].is_some() as u32,
            a.aromatic as u32,
        ];
        if use_chirality {
            inv.push(stereo[i]);
        }
        ids[i] = hash_words(&inv);
    }

    let mut out = Vec::new();
    let mut seen_ids = HashSet::new();
    for &i in &heavy {
        if seen_ids.insert(ids[i]) {
            out.push(ids[i]);
        }
    }

    let nb = g.bonds().len();
    let mut envs: Vec<BondSet> = vec![BondSet::new(nb); g.atom_count()];
    let mut seen_envs: HashSet<BondSet> = HashSet::new();
    for round in 1..=radius {
        let mut next_ids = ids.clone();
        let mut next_envs = envs.clone();
        let mut candidates: Vec<(BondSet, u32)> = Vec::new();
        for &i in &heavy {
            let mut nbrs: Vec<(u32, u32)> = g
                .neighbors(i)
                .iter()
                .filter(|&&(n, _)| g.atom(n).element != Element::H)
                .map(|&(n, bi)| (g.bond(bi).order.code(), ids[n]))
                .collect();
            nbrs.sort_unstable();
            let mut words = vec![round as u32, ids[i]];
            for (o, id) in &nbrs {
                words.push(*o);
                words.push(*id);
            }
            next_ids[i] = hash_words(&words);
            let mut env = envs[i].clone();
            for &(n, bi) in g.neighbors(i) {
                if g.atom(n).element != Element::H {
                    env.insert(bi);
                    env.union_with(&envs[n]);
                }
            }
            candidates.push((env.clone(), next_ids[i]));
            next_envs[i] = env;
        }
        candidates.sort();
        for (env, id) in candidates {
            if seen_envs.contains(&env) {
                continue;
            }
            seen_envs.insert(env);
            if seen_ids.insert(id) {
                out.push(id);
            }
        }
        // Round-0 environments are atom-specific and never collide with these.
        ids = next_ids;
        envs = next_envs;
    }
    out
}

/// Extended-connectivity fingerprint folded to `width` bits by `id mod width`.
pub fn morgan_fingerprint(
    g: &MolecularGraph,
    radius: usize,
    width: usize,
    use_chirality: bool,
) -> BitFingerprint {
    BitFingerprint::from_indices(
        width,
        morgan_identifiers(g, radius, use_chirality)
            .into_iter()
            .map(|id| id as usize % width),
    )
}

/// ECFP4: radius 2, 2,048 bits, chirality on.
pub fn ecfp4(g: &MolecularGraph) -> BitFingerprint {
    morgan_fingerprint(g, 2, COMPONENT_BITS, true)
}

/// ECFP6: radius 3, 2,048 bits, chirality on.
pub fn ecfp6(g: &MolecularGraph) -> BitFingerprint {
    morgan_fingerprint(g, 3, COMPONENT_BITS, true)
}

/// The 4,096-bit model input: ECFP4 followed by ECFP6.
pub fn input_fingerprint(g: &MolecularGraph) -> BitFingerprint {
    ecfp4(g).concat(&ecfp6(g))
}
