//! Two-dimensional cuts through the embedding space and the relation between
//! fingerprint distance and embedding distance.

use std::io::Write;

use ndarray::{Array1, ArrayView1};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::{tanimoto, BitFingerprint};
use crate::net::{ModelParameters, NetError};
use crate::search::{AStar, SearchBudget, StateMemory};
use crate::tokenizer::Vocabulary;

pub const DEGENERATE_TOL: f64 = 1e-9;
pub const DEFAULT_BIN_WIDTH: f64 = 0.1;
pub const DEFAULT_PAIRS_PER_BIN: usize = 400;

#[derive(Debug, Error)]
pub enum LandscapeError {
    #[error("anchor embeddings are collinear")]
    DegeneratePlane,
    #[error("invalid setting: {0}")]
    InvalidSetting(String),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneBasis {
    pub origin: Array1<f64>,
    pub u: Array1<f64>,
    pub v: Array1<f64>,
    pub anchor_coords: [(f64, f64); 3],
}

impl PlaneBasis {
    /// Coordinates of the orthogonal projection of `e` onto the plane.
    pub fn coords(&self, e: ArrayView1<f64>) -> (f64, f64) {
        let d = &e - &self.origin;
        (d.dot(&self.u), d.dot(&self.v))
    }

    pub fn point(&self, x: f64, y: f64) -> Array1<f64> {
        &self.origin + &(&self.u * x) + &(&self.v * y)
    }
}

/// Plane through three embeddings: origin at the first, `u` towards the
/// second, `v` the part of the third orthogonal to `u`.
pub fn plane_from_three(
    e1: ArrayView1<f64>,
    e2: ArrayView1<f64>,
    e3: ArrayView1<f64>,
) -> Result<PlaneBasis, LandscapeError> {
    let d2 = &e2 - &e1;
    let n2 = d2.dot(&d2).sqrt();
    if n2 < DEGENERATE_TOL {
        return Err(LandscapeError::DegeneratePlane);
    }
    let u = d2 / n2;
    let d3 = &e3 - &e1;
    let along = d3.dot(&u);
    let perp = &d3 - &(&u * along);
    let n3 = perp.dot(&perp).sqrt();
    if n3 < DEGENERATE_TOL {
        return Err(LandscapeError::DegeneratePlane);
    }
    let v = perp / n3;
    Ok(PlaneBasis {
        origin: e1.to_owned(),
        u,
        v,
        anchor_coords: [(0.0, 0.0), (n2, 0.0), (along, n3)],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Extent {
    /// Bounding box of the anchors widened by `margin` times its larger side.
    pub fn around_anchors(basis: &PlaneBasis, margin: f64) -> Extent {
        let xs = basis.anchor_coords.map(|c| c.0);
        let ys = basis.anchor_coords.map(|c| c.1);
        let lo = |a: [f64; 3]| a.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = |a: [f64; 3]| a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let side = (hi(xs) - lo(xs)).max(hi(ys) - lo(ys));
        Extent {
            x_min: lo(xs) - margin * side,
            x_max: hi(xs) + margin * side,
            y_min: lo(ys) - margin * side,
            y_max: hi(ys) + margin * side,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub rank: usize,
    pub smiles: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub x: f64,
    pub y: f64,
    pub solutions: Vec<Solution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeGrid {
    pub resolution: usize,
    pub extent: Extent,
    pub cells: Vec<GridCell>,
}

impl LandscapeGrid {
    /// Columns x, y, rank, smiles, probability.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "x,y,rank,smiles,probability")?;
        for c in &self.cells {
            for s in &c.solutions {
                writeln!(out, "{},{},{},{},{}", c.x, c.y, s.rank, s.smiles, s.probability)?;
            }
        }
        Ok(())
    }
}

/// Top-`top_k` A* molecules decoded from embedding-space points given in
/// plane coordinates.
pub fn sample_points(
    params: &ModelParameters,
    vocab: &Vocabulary,
    basis: &PlaneBasis,
    points: &[(f64, f64)],
    top_k: usize,
    budget: SearchBudget,
) -> Result<Vec<GridCell>, LandscapeError> {
    if top_k == 0 {
        return Err(LandscapeError::InvalidSetting("top_k must be at least 1".into()));
    }
    points
        .par_iter()
        .map(|&(x, y)| {
            let e = basis.point(x, y);
            let init = params.state_from_embedding(e.view());
            let mut stream = AStar::new(params, vocab, init, budget, StateMemory::Keep);
            let mut solutions = Vec::with_capacity(top_k);
            while solutions.len() < top_k {
                match stream.next_molecule()? {
                    Some(c) => solutions.push(Solution {
                        rank: solutions.len() + 1,
                        smiles: c.smiles,
                        probability: c.log_prob.exp(),
                    }),
                    None => break,
                }
            }
            Ok(GridCell { x, y, solutions })
        })
        .collect()
}

/// A `resolution × resolution` grid over `extent`, row by row in `y`.
pub fn sample_grid(
    params: &ModelParameters,
    vocab: &Vocabulary,
    basis: &PlaneBasis,
    resolution: usize,
    extent: Extent,
    top_k: usize,
    budget: SearchBudget,
) -> Result<LandscapeGrid, LandscapeError> {
    if resolution < 2 {
        return Err(LandscapeError::InvalidSetting("resolution must be at least 2".into()));
    }
    let step = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (resolution - 1) as f64;
    let points: Vec<(f64, f64)> = (0..resolution)
        .flat_map(|j| (0..resolution).map(move |i| (i, j)))
        .map(|(i, j)| (step(extent.x_min, extent.x_max, i), step(extent.y_min, extent.y_max, j)))
        .collect();
    Ok(LandscapeGrid {
        resolution,
        extent,
        cells: sample_points(params, vocab, basis, &points, top_k, budget)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub a: usize,
    pub b: usize,
    /// 1 − Tanimoto of the input fingerprints.
    pub jaccard: f64,
    /// Euclidean distance of the layer-1 embeddings.
    pub euclidean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSample {
    pub lower: f64,
    pub upper: f64,
    pub available: usize,
    pub pairs: Vec<PairSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PearsonReport {
    /// Absent when either distance has zero variance.
    pub r: Option<f64>,
    pub n_pairs: usize,
    pub bins: Vec<BinSample>,
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Bins all molecule pairs by fingerprint Jaccard distance, samples up to
/// `pairs_per_bin` from each bin and correlates the Jaccard distance with the
/// embedding distance over the sample.
pub fn distance_correlation(
    params: &ModelParameters,
    dataset: &[BitFingerprint],
    bin_width: f64,
    pairs_per_bin: usize,
    seed: u64,
) -> Result<PearsonReport, LandscapeError> {
    if dataset.len() < 2 {
        return Err(LandscapeError::InvalidSetting("need at least two molecules".into()));
    }
    if !(bin_width > 0.0 && bin_width <= 1.0) {
        return Err(LandscapeError::InvalidSetting("bin_width must lie in (0, 1]".into()));
    }
    let emb = params.embed_many(dataset)?;
    let n_bins = (1.0 / bin_width).ceil() as usize;
    let mut members: Vec<Vec<(u32, u32, f64)>> = vec![Vec::new(); n_bins];
    for a in 0..dataset.len() {
        for b in a + 1..dataset.len() {
            let d = 1.0 - tanimoto(&dataset[a], &dataset[b]).map_err(|_| NetError::WidthMismatch {
                expected: dataset[a].width(),
                got: dataset[b].width(),
            })?;
            let k = ((d / bin_width).floor() as usize).min(n_bins - 1);
            members[k].push((a as u32, b as u32, d));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bins = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (k, m) in members.iter().enumerate() {
        if m.is_empty() {
            continue;
        }
        let mut picks = sample(&mut rng, m.len(), pairs_per_bin.min(m.len())).into_vec();
        picks.sort_unstable();
        let pairs: Vec<PairSample> = picks
            .into_iter()
            .map(|i| {
                let (a, b, d) = m[i];
                let diff = &emb.row(a as usize) - &emb.row(b as usize);
                PairSample {
                    a: a as usize,
                    b: b as usize,
                    jaccard: d,
                    euclidean: diff.dot(&diff).sqrt(),
                }
            })
            .collect();
        for p in &pairs {
            xs.push(p.jaccard);
            ys.push(p.euclidean);
        }
        bins.push(BinSample {
            lower: k as f64 * bin_width,
            upper: ((k + 1) as f64 * bin_width).min(1.0),
            available: m.len(),
            pairs,
        });
    }
    Ok(PearsonReport {
        r: pearson(&xs, &ys),
        n_pairs: xs.len(),
        bins,
    })
}
