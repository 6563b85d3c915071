//! Inference-mode encoder and decoder: running batch-norm statistics, no dropout.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use super::{ModelParameters, NetError, BN_EPS};
use crate::fingerprint::BitFingerprint;
use crate::tokenizer::{TokenSequence, START};

/// Per-layer hidden and cell vectors of the decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub h: Vec<Array1<f64>>,
    pub c: Vec<Array1<f64>>,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// In-place log-softmax.
pub(crate) fn log_softmax(v: &mut [f64]) {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    v.iter_mut().for_each(|x| *x -= lse);
}

fn batch_norm(x: ArrayView1<f64>, gamma: &Array1<f64>, beta: &Array1<f64>, mean: &Array1<f64>, var: &Array1<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(x.len());
    for i in 0..x.len() {
        out[i] = (x[i] - mean[i]) / (var[i] + BN_EPS).sqrt() * gamma[i] + beta[i];
    }
    out
}

impl ModelParameters {
    fn check_width(&self, fp: &BitFingerprint) -> Result<(), NetError> {
        if fp.width() != self.config.input_bits {
            return Err(NetError::WidthMismatch {
                expected: self.config.input_bits,
                got: fp.width(),
            });
        }
        Ok(())
    }

    /// Output of the first encoder layer.
    pub fn embed(&self, fp: &BitFingerprint) -> Result<Array1<f64>, NetError> {
        self.check_width(fp)?;
        let w = &self.weights;
        let x = Array1::from(fp.to_dense());
        let z = batch_norm(x.view(), &w.bn1_gamma, &w.bn1_beta, &self.bn1_mean, &self.bn1_var);
        Ok((w.fc1_w.dot(&z) + &w.fc1_b).mapv(f64::tanh))
    }

    /// Decoder start state for an embedding-space point: the second encoder
    /// layer sets layer-1 hidden and cell, deeper layers start at zero.
    pub fn state_from_embedding(&self, e: ArrayView1<f64>) -> DecoderState {
        let w = &self.weights;
        let z = batch_norm(e, &w.bn2_gamma, &w.bn2_beta, &self.bn2_mean, &self.bn2_var);
        let init = (w.fc2_w.dot(&z) + &w.fc2_b).mapv(f64::tanh);
        let mut h = Vec::with_capacity(self.config.num_layers);
        let mut c = Vec::with_capacity(self.config.num_layers);
        for l in 0..self.config.num_layers {
            if l == 0 {
                h.push(init.clone());
                c.push(init.clone());
            } else {
                let n = self.config.layer_hidden(l);
                h.push(Array1::zeros(n));
                c.push(Array1::zeros(n));
            }
        }
        DecoderState { h, c }
    }

    pub fn encode_fingerprint(&self, fp: &BitFingerprint) -> Result<(Array1<f64>, DecoderState), NetError> {
        let e = self.embed(fp)?;
        let st = self.state_from_embedding(e.view());
        Ok((e, st))
    }

    fn check_token(&self, token: u32) -> Result<(), NetError> {
        if token as usize >= self.config.vocab_size {
            return Err(NetError::InvalidToken(token));
        }
        Ok(())
    }

    /// Feeds `token` and returns the log-distribution over the next token.
    pub fn decoder_step(&self, state: &DecoderState, token: u32) -> Result<(Vec<f64>, DecoderState), NetError> {
        self.check_token(token)?;
        let w = &self.weights;
        let mut x = w.embedding.row(token as usize).to_owned();
        let mut next = DecoderState {
            h: Vec::with_capacity(w.lstm.len()),
            c: Vec::with_capacity(w.lstm.len()),
        };
        for (l, m) in w.lstm.iter().enumerate() {
            let n = m.hidden();
            let g = m.w_ih.dot(&x) + m.w_hh.dot(&state.h[l]) + &m.b_ih + &m.b_hh;
            let mut h = Array1::zeros(n);
            let mut c = Array1::zeros(n);
            for j in 0..n {
                let i = sigmoid(g[j]);
                let f = sigmoid(g[n + j]);
                let gg = g[2 * n + j].tanh();
                let o = sigmoid(g[3 * n + j]);
                c[j] = f * state.c[l][j] + i * gg;
                h[j] = o * c[j].tanh();
            }
            x = h.clone();
            next.h.push(h);
            next.c.push(c);
        }
        let mut logits = w.embedding.dot(&x).to_vec();
        log_softmax(&mut logits);
        Ok((logits, next))
    }

    /// [`decoder_step`](Self::decoder_step) for many states at once.
    pub fn decoder_step_batch(
        &self,
        states: &[&DecoderState],
        tokens: &[u32],
    ) -> Result<(Vec<Vec<f64>>, Vec<DecoderState>), NetError> {
        if states.len() != tokens.len() {
            return Err(NetError::ShapeMismatch(format!(
                "{} states for {} tokens",
                states.len(),
                tokens.len()
            )));
        }
        let b = states.len();
        if b == 0 {
            return Ok((Vec::new(), Vec::new()));
        }
        for &t in tokens {
            self.check_token(t)?;
        }
        let w = &self.weights;
        let e = self.config.embed_dim;
        let mut x = Array2::zeros((b, e));
        for (r, &t) in tokens.iter().enumerate() {
            x.row_mut(r).assign(&w.embedding.row(t as usize));
        }
        let mut hs = Vec::with_capacity(w.lstm.len());
        let mut cs = Vec::with_capacity(w.lstm.len());
        for (l, m) in w.lstm.iter().enumerate() {
            let n = m.hidden();
            let mut hp = Array2::zeros((b, n));
            let mut cp = Array2::zeros((b, n));
            for (r, st) in states.iter().enumerate() {
                hp.row_mut(r).assign(&st.h[l]);
                cp.row_mut(r).assign(&st.c[l]);
            }
            let bias = &m.b_ih + &m.b_hh;
            let g = x.dot(&m.w_ih.t()) + hp.dot(&m.w_hh.t()) + &bias;
            let mut h = Array2::zeros((b, n));
            let mut c = Array2::zeros((b, n));
            for r in 0..b {
                for j in 0..n {
                    let i = sigmoid(g[[r, j]]);
                    let f = sigmoid(g[[r, n + j]]);
                    let gg = g[[r, 2 * n + j]].tanh();
                    let o = sigmoid(g[[r, 3 * n + j]]);
                    c[[r, j]] = f * cp[[r, j]] + i * gg;
                    h[[r, j]] = o * c[[r, j]].tanh();
                }
            }
            x = h.clone();
            hs.push(h);
            cs.push(c);
        }
        let logits = x.dot(&w.embedding.t());
        let mut out = Vec::with_capacity(b);
        let mut next = Vec::with_capacity(b);
        for r in 0..b {
            let mut lp = logits.row(r).to_vec();
            log_softmax(&mut lp);
            out.push(lp);
            next.push(DecoderState {
                h: hs.iter().map(|a| a.row(r).to_owned()).collect(),
                c: cs.iter().map(|a| a.row(r).to_owned()).collect(),
            });
        }
        Ok((out, next))
    }

    /// Log-probability of every token after START, in order.
    pub fn step_log_probs(&self, state: &DecoderState, ids: &[u32]) -> Result<Vec<f64>, NetError> {
        if ids.first() != Some(&START) {
            return Err(NetError::ShapeMismatch("sequence must begin with START".into()));
        }
        let mut st = state.clone();
        let mut out = Vec::with_capacity(ids.len() - 1);
        for k in 0..ids.len() - 1 {
            let (lp, next) = self.decoder_step(&st, ids[k])?;
            self.check_token(ids[k + 1])?;
            out.push(lp[ids[k + 1] as usize]);
            st = next;
        }
        Ok(out)
    }

    /// `log p(y₁…y_T | f)`.
    pub fn sequence_log_prob(&self, fp: &BitFingerprint, tokens: &TokenSequence) -> Result<f64, NetError> {
        let (_, st) = self.encode_fingerprint(fp)?;
        Ok(self.step_log_probs(&st, &tokens.ids)?.iter().sum())
    }

    /// Layer-1 embeddings for a batch of fingerprints, one row each.
    pub fn embed_many(&self, fps: &[BitFingerprint]) -> Result<Array2<f64>, NetError> {
        let mut out = Array2::zeros((fps.len(), self.config.hidden_dim));
        for (r, fp) in fps.iter().enumerate() {
            out.row_mut(r).assign(&self.embed(fp)?);
        }
        Ok(out)
    }
}

/// Column means and biased variances of `x`.
pub(crate) fn column_stats(x: &Array2<f64>) -> (Array1<f64>, Array1<f64>) {
    let mean = x.mean_axis(Axis(0)).expect("non-empty batch");
    let var = x.var_axis(Axis(0), 0.0);
    (mean, var)
}
