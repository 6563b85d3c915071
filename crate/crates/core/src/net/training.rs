//! Training-mode forward pass with dropout masks, teacher forcing, the
//! activation penalties, and the matching backward pass.

use ndarray::{s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::infer::{column_stats, sigmoid};
use super::{ModelConfig, ModelParameters, NetError, Weights, BN_EPS, BN_MOMENTUM};
use crate::fingerprint::BitFingerprint;

/// Dense fingerprints and teacher-forcing token sequences (START … END).
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Array2<f64>,
    pub tokens: Vec<Vec<u32>>,
}

impl Batch {
    pub fn new(fps: &[&BitFingerprint], tokens: Vec<Vec<u32>>) -> Result<Batch, NetError> {
        if fps.len() != tokens.len() || fps.is_empty() {
            return Err(NetError::ShapeMismatch(format!(
                "{} fingerprints for {} sequences",
                fps.len(),
                tokens.len()
            )));
        }
        let width = fps[0].width();
        let mut inputs = Array2::zeros((fps.len(), width));
        for (r, fp) in fps.iter().enumerate() {
            if fp.width() != width {
                return Err(NetError::ShapeMismatch("fingerprint widths differ".into()));
            }
            for b in fp.ones() {
                inputs[[r, b]] = 1.0;
            }
        }
        if tokens.iter().any(|t| t.len() < 2) {
            return Err(NetError::ShapeMismatch("sequence shorter than two tokens".into()));
        }
        Ok(Batch { inputs, tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn steps(&self) -> usize {
        self.tokens.iter().map(|t| t.len() - 1).max().unwrap_or(0)
    }
}

/// Scaled keep-masks (0 or `1/(1−p)`) for one batch.
#[derive(Debug, Clone)]
pub struct DropoutMasks {
    /// `(batch, hidden)` before the second encoder affine layer.
    pub encoder: Array2<f64>,
    /// One factor per vocabulary row, applied to embedding lookups.
    pub embed_rows: Array1<f64>,
    /// `(batch, embed)`, reused at every time step.
    pub input: Array2<f64>,
    /// Per layer, same shape as its hidden-to-hidden matrix.
    pub weight: Vec<Array2<f64>>,
    /// Per non-final layer, `(batch, hidden)` on its output.
    pub hidden: Vec<Array2<f64>>,
    /// `(batch, embed)` on the final layer's output.
    pub output: Array2<f64>,
}

fn keep_mask(shape: (usize, usize), p: f64, rng: &mut impl Rng) -> Array2<f64> {
    if p == 0.0 {
        return Array2::ones(shape);
    }
    let keep = 1.0 / (1.0 - p);
    Array2::from_shape_fn(shape, |_| if rng.random::<f64>() < p { 0.0 } else { keep })
}

impl DropoutMasks {
    pub fn sample(c: &ModelConfig, batch: usize, rng: &mut impl Rng) -> DropoutMasks {
        let encoder = keep_mask((batch, c.hidden_dim), c.p_enc, rng);
        let embed_rows = keep_mask((1, c.vocab_size), c.p_embed, rng).row(0).to_owned();
        let input = keep_mask((batch, c.embed_dim), c.p_input, rng);
        let weight = (0..c.num_layers)
            .map(|l| {
                let n = c.layer_hidden(l);
                keep_mask((4 * n, n), c.p_weight, rng)
            })
            .collect();
        let hidden = (0..c.num_layers - 1)
            .map(|l| keep_mask((batch, c.layer_hidden(l)), c.p_hidden, rng))
            .collect();
        let output = keep_mask((batch, c.embed_dim), c.p_output, rng);
        DropoutMasks {
            encoder,
            embed_rows,
            input,
            weight,
            hidden,
            output,
        }
    }

    /// All-ones masks.
    pub fn none(c: &ModelConfig, batch: usize) -> DropoutMasks {
        DropoutMasks::sample(&c.without_regularization(), batch, &mut ChaCha8Rng::seed_from_u64(0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub nll: f64,
    pub ar: f64,
    pub tar: f64,
    pub total: f64,
}

/// Batch means and unbiased variances seen by the two batch-norm layers.
#[derive(Debug, Clone)]
pub struct BatchNormStats {
    pub bn1_mean: Array1<f64>,
    pub bn1_var: Array1<f64>,
    pub bn2_mean: Array1<f64>,
    pub bn2_var: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardBackward {
    pub loss: LossBreakdown,
    pub grads: Weights,
    pub bn_stats: BatchNormStats,
    /// Final-layer outputs before output dropout, `[step][row]`; kept for
    /// inspection in tests.
    pub final_outputs: Vec<Array2<f64>>,
    pub dropped_outputs: Vec<Array2<f64>>,
}

impl ModelParameters {
    /// Exponential running-statistics update (momentum [`BN_MOMENTUM`]).
    pub fn update_running_stats(&mut self, st: &BatchNormStats, include_first_layer: bool) {
        let m = BN_MOMENTUM;
        let blend = |run: &mut Array1<f64>, batch: &Array1<f64>| {
            run.zip_mut_with(batch, |r, &b| *r = (1.0 - m) * *r + m * b);
        };
        if include_first_layer {
            blend(&mut self.bn1_mean, &st.bn1_mean);
            blend(&mut self.bn1_var, &st.bn1_var);
        }
        blend(&mut self.bn2_mean, &st.bn2_mean);
        blend(&mut self.bn2_var, &st.bn2_var);
    }
}

struct LayerCache {
    u: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    tc: Array2<f64>,
}

fn unbiased(var: &Array1<f64>, n: usize) -> Array1<f64> {
    if n > 1 {
        var * (n as f64 / (n as f64 - 1.0))
    } else {
        var.clone()
    }
}

/// Loss for one batch with masks drawn from `seed`.
pub fn training_forward(params: &ModelParameters, batch: &Batch, seed: u64) -> Result<LossBreakdown, NetError> {
    let masks = DropoutMasks::sample(&params.config, batch.len(), &mut ChaCha8Rng::seed_from_u64(seed));
    Ok(forward_backward(params, batch, &masks, true)?.loss)
}

/// Loss and gradients of `total` for one batch. When `first_layer_grads` is
/// false the first encoder layer's gradients are left at zero.
pub fn forward_backward(
    params: &ModelParameters,
    batch: &Batch,
    masks: &DropoutMasks,
    first_layer_grads: bool,
) -> Result<ForwardBackward, NetError> {
    let c = &params.config;
    let w = &params.weights;
    let bsz = batch.len();
    if batch.inputs.ncols() != c.input_bits {
        return Err(NetError::WidthMismatch {
            expected: c.input_bits,
            got: batch.inputs.ncols(),
        });
    }
    if masks.input.nrows() != bsz {
        return Err(NetError::ShapeMismatch("masks sized for a different batch".into()));
    }
    for t in batch.tokens.iter().flatten() {
        if *t as usize >= c.vocab_size {
            return Err(NetError::InvalidToken(*t));
        }
    }
    let nl = c.num_layers;
    let e_dim = c.embed_dim;

    // Encoder.
    let x = &batch.inputs;
    let (mu1, var1) = column_stats(x);
    let inv1 = var1.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
    let xhat = (x - &mu1) * &inv1;
    let z1 = &xhat * &w.bn1_gamma + &w.bn1_beta;
    let e = (z1.dot(&w.fc1_w.t()) + &w.fc1_b).mapv(f64::tanh);
    let (mu2, var2) = column_stats(&e);
    let inv2 = var2.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
    let ehat = (&e - &mu2) * &inv2;
    let z2d = (&ehat * &w.bn2_gamma + &w.bn2_beta) * &masks.encoder;
    let s0 = (z2d.dot(&w.fc2_w.t()) + &w.fc2_b).mapv(f64::tanh);

    // Decoder, teacher forced.
    let steps = batch.steps();
    let valid: Vec<Vec<bool>> = (0..steps)
        .map(|t| batch.tokens.iter().map(|seq| t + 1 < seq.len()).collect())
        .collect();
    let n_valid: usize = valid.iter().flatten().filter(|&&v| v).count();
    let n_pairs: usize = valid.iter().skip(1).flatten().filter(|&&v| v).count();
    let whh: Vec<Array2<f64>> = w
        .lstm
        .iter()
        .zip(&masks.weight)
        .map(|(m, k)| &m.w_hh * k)
        .collect();
    let bias: Vec<Array1<f64>> = w.lstm.iter().map(|m| &m.b_ih + &m.b_hh).collect();
    let mut h: Vec<Array2<f64>> = Vec::with_capacity(nl);
    let mut cs: Vec<Array2<f64>> = Vec::with_capacity(nl);
    for l in 0..nl {
        if l == 0 {
            h.push(s0.clone());
            cs.push(s0.clone());
        } else {
            h.push(Array2::zeros((bsz, c.layer_hidden(l))));
            cs.push(Array2::zeros((bsz, c.layer_hidden(l))));
        }
    }

    let mut caches: Vec<Vec<LayerCache>> = Vec::with_capacity(steps);
    let mut raw: Vec<Array2<f64>> = Vec::with_capacity(steps);
    let mut dropped: Vec<Array2<f64>> = Vec::with_capacity(steps);
    let mut probs: Vec<Array2<f64>> = Vec::with_capacity(steps);
    let mut nll_sum = 0.0;
    let mut ar_sum = 0.0;
    let mut tar_sum = 0.0;
    let step_tokens = |t: usize| -> Vec<u32> {
        batch
            .tokens
            .iter()
            .map(|seq| if t + 1 < seq.len() { seq[t] } else { 0 })
            .collect()
    };

    for t in 0..steps {
        let toks = step_tokens(t);
        let mut u = Array2::zeros((bsz, e_dim));
        for (r, &tok) in toks.iter().enumerate() {
            u.row_mut(r)
                .assign(&(&w.embedding.row(tok as usize) * masks.embed_rows[tok as usize]));
        }
        u *= &masks.input;
        let mut layer_caches = Vec::with_capacity(nl);
        for l in 0..nl {
            let n = c.layer_hidden(l);
            let gates = u.dot(&w.lstm[l].w_ih.t()) + h[l].dot(&whh[l].t()) + &bias[l];
            let ig = gates.slice(s![.., 0..n]).mapv(sigmoid);
            let fg = gates.slice(s![.., n..2 * n]).mapv(sigmoid);
            let gg = gates.slice(s![.., 2 * n..3 * n]).mapv(f64::tanh);
            let og = gates.slice(s![.., 3 * n..4 * n]).mapv(sigmoid);
            let c_new = &fg * &cs[l] + &ig * &gg;
            let tc = c_new.mapv(f64::tanh);
            let h_new = &og * &tc;
            let next_u = if l + 1 < nl {
                &h_new * &masks.hidden[l]
            } else {
                h_new.clone()
            };
            let h_prev = std::mem::replace(&mut h[l], h_new);
            let c_prev = std::mem::replace(&mut cs[l], c_new);
            layer_caches.push(LayerCache {
                u: std::mem::replace(&mut u, next_u),
                h_prev,
                c_prev,
                i: ig,
                f: fg,
                g: gg,
                o: og,
                tc,
            });
        }
        caches.push(layer_caches);
        let r = h[nl - 1].clone();
        let d = &r * &masks.output;
        let mut p = d.dot(&w.embedding.t());
        for (row, mut pr) in p.axis_iter_mut(Axis(0)).enumerate() {
            let m = pr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            pr.mapv_inplace(|z| (z - m).exp());
            let sum = pr.sum();
            pr /= sum;
            if valid[t][row] {
                let y = batch.tokens[row][t + 1] as usize;
                nll_sum -= pr[y].max(f64::MIN_POSITIVE).ln();
                ar_sum += d.row(row).iter().map(|v| v * v).sum::<f64>();
                if t > 0 {
                    let diff = &r.row(row) - &raw[t - 1].row(row);
                    tar_sum += diff.iter().map(|v| v * v).sum::<f64>();
                }
            }
        }
        raw.push(r);
        dropped.push(d);
        probs.push(p);
    }

    let nv = n_valid.max(1) as f64;
    let ar_scale = c.ar_coeff / (nv * e_dim as f64);
    let tar_scale = if n_pairs > 0 {
        c.tar_coeff / (n_pairs as f64 * e_dim as f64)
    } else {
        0.0
    };
    let loss = {
        let nll = nll_sum / nv;
        let ar = ar_scale * ar_sum;
        let tar = tar_scale * tar_sum;
        LossBreakdown {
            nll,
            ar,
            tar,
            total: nll + ar + tar,
        }
    };

    // Backward.
    let mut grads = Weights::zeros(c);
    let mut dr: Vec<Array2<f64>> = Vec::with_capacity(steps);
    for t in 0..steps {
        let mut dlogits = probs[t].clone();
        for row in 0..bsz {
            if valid[t][row] {
                dlogits[[row, batch.tokens[row][t + 1] as usize]] -= 1.0;
            } else {
                dlogits.row_mut(row).fill(0.0);
            }
        }
        dlogits /= nv;
        grads.embedding += &dlogits.t().dot(&dropped[t]);
        let mut dd = dlogits.dot(&w.embedding);
        for row in 0..bsz {
            if valid[t][row] {
                dd.row_mut(row).scaled_add(2.0 * ar_scale, &dropped[t].row(row));
            }
        }
        dr.push(dd * &masks.output);
    }
    for t in 1..steps {
        for row in 0..bsz {
            if valid[t][row] {
                let diff = &raw[t].row(row) - &raw[t - 1].row(row);
                dr[t].row_mut(row).scaled_add(2.0 * tar_scale, &diff);
                dr[t - 1].row_mut(row).scaled_add(-2.0 * tar_scale, &diff);
            }
        }
    }

    let mut dh_next: Vec<Array2<f64>> = (0..nl).map(|l| Array2::zeros((bsz, c.layer_hidden(l)))).collect();
    let mut dc_next = dh_next.clone();
    let mut dwhh: Vec<Array2<f64>> = whh.iter().map(|m| Array2::zeros(m.raw_dim())).collect();
    for t in (0..steps).rev() {
        let mut from_above = std::mem::take(&mut dr[t]);
        for l in (0..nl).rev() {
            let k = &caches[t][l];
            let n = c.layer_hidden(l);
            let dh = &from_above + &dh_next[l];
            let d_o = &dh * &k.tc;
            let dc = &dh * &k.o * &k.tc.mapv(|v| 1.0 - v * v) + &dc_next[l];
            let mut dg = Array2::zeros((bsz, 4 * n));
            dg.slice_mut(s![.., 0..n])
                .assign(&(&dc * &k.g * &k.i * &k.i.mapv(|v| 1.0 - v)));
            dg.slice_mut(s![.., n..2 * n])
                .assign(&(&dc * &k.c_prev * &k.f * &k.f.mapv(|v| 1.0 - v)));
            dg.slice_mut(s![.., 2 * n..3 * n])
                .assign(&(&dc * &k.i * &k.g.mapv(|v| 1.0 - v * v)));
            dg.slice_mut(s![.., 3 * n..4 * n])
                .assign(&(&d_o * &k.o * &k.o.mapv(|v| 1.0 - v)));
            dc_next[l] = &dc * &k.f;
            let gl = &mut grads.lstm[l];
            gl.w_ih += &dg.t().dot(&k.u);
            dwhh[l] += &dg.t().dot(&k.h_prev);
            let db = dg.sum_axis(Axis(0));
            gl.b_ih += &db;
            gl.b_hh += &db;
            let du = dg.dot(&w.lstm[l].w_ih);
            dh_next[l] = dg.dot(&whh[l]);
            if l > 0 {
                from_above = du * &masks.hidden[l - 1];
            } else {
                let dx = du * &masks.input;
                for (row, &tok) in step_tokens(t).iter().enumerate() {
                    let scale = masks.embed_rows[tok as usize];
                    if scale != 0.0 {
                        grads
                            .embedding
                            .row_mut(tok as usize)
                            .scaled_add(scale, &dx.row(row));
                    }
                }
                from_above = Array2::zeros((0, 0));
            }
        }
    }
    for (l, g) in dwhh.into_iter().enumerate() {
        grads.lstm[l].w_hh = g * &masks.weight[l];
    }

    let ds = &dh_next[0] + &dc_next[0];
    let da2 = &ds * &s0.mapv(|v| 1.0 - v * v);
    grads.fc2_w = da2.t().dot(&z2d);
    grads.fc2_b = da2.sum_axis(Axis(0));
    let dz2 = da2.dot(&w.fc2_w) * &masks.encoder;
    grads.bn2_gamma = (&dz2 * &ehat).sum_axis(Axis(0));
    grads.bn2_beta = dz2.sum_axis(Axis(0));
    let de = batch_norm_backward(&(&dz2 * &w.bn2_gamma), &ehat, &inv2);
    let da1 = de * &e.mapv(|v| 1.0 - v * v);
    if first_layer_grads {
        grads.fc1_w = da1.t().dot(&z1);
        grads.fc1_b = da1.sum_axis(Axis(0));
        let dz1 = da1.dot(&w.fc1_w);
        grads.bn1_gamma = (&dz1 * &xhat).sum_axis(Axis(0));
        grads.bn1_beta = dz1.sum_axis(Axis(0));
    }

    Ok(ForwardBackward {
        loss,
        grads,
        bn_stats: BatchNormStats {
            bn1_mean: mu1,
            bn1_var: unbiased(&var1, bsz),
            bn2_mean: mu2,
            bn2_var: unbiased(&var2, bsz),
        },
        final_outputs: raw,
        dropped_outputs: dropped,
    })
}

/// Gradient through `x̂ = (x − μ)/σ` with batch statistics.
fn batch_norm_backward(dxhat: &Array2<f64>, xhat: &Array2<f64>, inv: &Array1<f64>) -> Array2<f64> {
    let n = dxhat.nrows() as f64;
    let sum = dxhat.sum_axis(Axis(0));
    let dot = (dxhat * xhat).sum_axis(Axis(0));
    ((dxhat * n) - &sum - &(xhat * &dot)) * &(inv / n)
}
