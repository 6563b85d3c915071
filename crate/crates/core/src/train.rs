//! Adam with a one-cycle learning-rate/momentum schedule, global-norm
//! gradient clipping, multiplicative weight decay and random per-molecule
//! direction choice.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::{input_fingerprint, BitFingerprint};
use crate::net::{
    forward_backward, is_first_encoder_layer, Batch, DropoutMasks, LossBreakdown, ModelParameters,
    NetError, Weights,
};
use crate::tokenizer::{TokenizerError, Vocabulary};

pub const PHASE_UP_END: f64 = 0.49;
pub const PHASE_DOWN_END: f64 = 0.98;
pub const MOMENTUM_HIGH: f64 = 0.8;
pub const MOMENTUM_LOW: f64 = 0.6;
pub const ADAM_BETA2: f64 = 0.99;
pub const ADAM_EPS: f64 = 1e-8;
/// Largest tolerated fraction of skipped (non-finite) steps.
pub const MAX_SKIPPED_FRACTION: f64 = 0.01;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("{skipped} of {steps} steps skipped for non-finite gradients")]
    TooManySkipped { skipped: usize, steps: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("no training examples")]
    EmptyCorpus,
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub max_lr: f64,
    pub dividing_factor: f64,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Leave the fingerprint-to-embedding layer (and its batch-norm
    /// statistics) untouched.
    pub freeze_first_encoder_layer: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 128,
            max_lr: 1e-3,
            dividing_factor: 10.0,
            clip_norm: 0.3,
            batch_size: 200,
            seed: 0,
            freeze_first_encoder_layer: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.max_lr > 0.0) {
            return bad("max_lr must be positive");
        }
        if !(self.dividing_factor > 1.0) {
            return bad("dividing_factor must exceed 1");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive");
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("epochs and batch_size must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleState {
    pub step_fraction: f64,
    pub lr: f64,
    pub momentum: f64,
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Learning rate and momentum at `step_fraction` of a one-cycle schedule:
/// warm-up over `[0, 0.49)`, cool-down over `[0.49, 0.98)`, and a final
/// anneal to `max_lr / div³` over `[0.98, 1]`.
pub fn one_cycle(step_fraction: f64, max_lr: f64, dividing_factor: f64) -> ScheduleState {
    let t = step_fraction.clamp(0.0, 1.0);
    let low = max_lr / dividing_factor;
    let (lr, momentum) = if t < PHASE_UP_END {
        let u = t / PHASE_UP_END;
        (lerp(low, max_lr, u), lerp(MOMENTUM_HIGH, MOMENTUM_LOW, u))
    } else if t < PHASE_DOWN_END {
        let u = (t - PHASE_UP_END) / (PHASE_DOWN_END - PHASE_UP_END);
        (lerp(max_lr, low, u), lerp(MOMENTUM_LOW, MOMENTUM_HIGH, u))
    } else {
        let u = (t - PHASE_DOWN_END) / (1.0 - PHASE_DOWN_END);
        let end = low / (dividing_factor * dividing_factor);
        (lerp(low, end, u), MOMENTUM_HIGH)
    };
    ScheduleState {
        step_fraction: t,
        lr,
        momentum,
    }
}

/// Scales `grads` to global L2 norm `clip_norm` when larger; returns the
/// norm before clipping.
pub fn clip_gradient_norm(grads: &mut Weights, clip_norm: f64) -> Result<f64, TrainError> {
    let norm = grads.sq_norm().sqrt();
    if !norm.is_finite() {
        return Err(TrainError::NonFiniteGradient);
    }
    if norm > clip_norm {
        grads.scale(clip_norm / norm);
    }
    Ok(norm)
}

/// Adam moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Weights,
    v: Weights,
    step: i32,
}

impl Adam {
    pub fn new(params: &ModelParameters) -> Adam {
        Adam {
            m: Weights::zeros(&params.config),
            v: Weights::zeros(&params.config),
            step: 0,
        }
    }

    /// One update with `beta1 = momentum`, then `w ← w·(1 − weight_decay)`.
    /// Tensors rejected by `trainable` are left unchanged.
    pub fn update(
        &mut self,
        params: &mut ModelParameters,
        grads: &Weights,
        sched: ScheduleState,
        trainable: &dyn Fn(&str) -> bool,
    ) {
        self.step += 1;
        let b1 = sched.momentum;
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step);
        let decay = 1.0 - params.config.weight_decay;
        let g = grads.tensors();
        let m = self.m.tensors_mut();
        let v = self.v.tensors_mut();
        for ((((name, w), (_, g)), (_, m)), (_, v)) in
            params.weights.tensors_mut().into_iter().zip(g).zip(m).zip(v)
        {
            if !trainable(&name) {
                continue;
            }
            for k in 0..w.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * g[k] * g[k];
                let mh = m[k] / c1;
                let vh = v[k] / c2;
                w[k] -= sched.lr * mh / (vh.sqrt() + ADAM_EPS);
                w[k] *= decay;
            }
        }
    }
}

/// A fingerprint with its target token sequences in both directions.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub fingerprint: BitFingerprint,
    pub forward: Vec<u32>,
    pub reversed: Vec<u32>,
}

impl TrainExample {
    /// Input and target may differ (matched pairs); for pretraining they coincide.
    pub fn new(vocab: &Vocabulary, input: &crate::chem::MolecularGraph, target_smiles: &str) -> Result<TrainExample, TrainError> {
        Ok(TrainExample {
            fingerprint: input_fingerprint(input),
            forward: vocab.encode(target_smiles, false)?.ids,
            reversed: vocab.encode(target_smiles, true)?.ids,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    pub lr: f64,
    pub momentum: f64,
    pub loss: LossBreakdown,
    pub grad_norm: f64,
    pub skipped: bool,
}

impl StepRecord {
    /// Tab-separated training-log line.
    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{:.6e}\t{:.4}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            self.epoch,
            self.step,
            self.lr,
            self.momentum,
            self.loss.nll,
            self.loss.ar,
            self.loss.tar,
            self.grad_norm
        )
    }
}

pub const LOG_HEADER: &str = "epoch\tstep\tlr\tmomentum\tnll\tar\ttar\tgrad_norm";

/// Hooks called during training.
pub trait TrainObserver {
    fn on_step(&mut self, _record: &StepRecord) {}
    fn on_epoch(&mut self, _epoch: usize, _mean_loss: &LossBreakdown, _params: &ModelParameters) {}
}

impl TrainObserver for () {}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    /// Mean loss per epoch over non-skipped steps.
    pub epoch_losses: Vec<LossBreakdown>,
    pub steps: usize,
    pub skipped: usize,
    pub reversed_fraction: f64,
}

/// Per-epoch batches of example indices with their direction flags. Within
/// windows of 50 batches, examples are grouped by length.
pub fn epoch_batches(
    examples: &[TrainExample],
    batch_size: usize,
    rng: &mut impl Rng,
) -> Vec<Vec<(usize, bool)>> {
    let mut order: Vec<(usize, bool)> = (0..examples.len()).map(|i| (i, rng.random_bool(0.5))).collect();
    order.shuffle(rng);
    let len_of = |&(i, rev): &(usize, bool)| {
        if rev {
            examples[i].reversed.len()
        } else {
            examples[i].forward.len()
        }
    };
    let mut batches = Vec::new();
    for window in order.chunks_mut(batch_size * 50) {
        window.sort_by_key(len_of);
        for b in window.chunks(batch_size) {
            batches.push(b.to_vec());
        }
    }
    batches.shuffle(rng);
    batches
}

fn steps_per_epoch(n: usize, batch_size: usize) -> usize {
    let window = batch_size * 50;
    (n / window) * 50 + (n % window).div_ceil(batch_size)
}

/// Trains `params` in place.
pub fn train(
    params: &mut ModelParameters,
    examples: &[TrainExample],
    config: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainReport, TrainError> {
    config.validate()?;
    if examples.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let freeze = config.freeze_first_encoder_layer;
    let trainable = |name: &str| !(freeze && is_first_encoder_layer(name));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(params);
    let per_epoch = steps_per_epoch(examples.len(), config.batch_size);
    let total_steps = per_epoch * config.epochs;
    let mut report = TrainReport::default();
    let mut reversed = 0usize;
    let mut seen = 0usize;

    for epoch in 0..config.epochs {
        let batches = epoch_batches(examples, config.batch_size, &mut rng);
        let mut sum = LossBreakdown::default();
        let mut counted = 0usize;
        for members in batches {
            let fps: Vec<&BitFingerprint> = members.iter().map(|&(i, _)| &examples[i].fingerprint).collect();
            let tokens: Vec<Vec<u32>> = members
                .iter()
                .map(|&(i, rev)| {
                    if rev {
                        examples[i].reversed.clone()
                    } else {
                        examples[i].forward.clone()
                    }
                })
                .collect();
            reversed += members.iter().filter(|m| m.1).count();
            seen += members.len();
            let batch = Batch::new(&fps, tokens)?;
            let masks = DropoutMasks::sample(&params.config, batch.len(), &mut rng);
            let sched = one_cycle(report.steps as f64 / total_steps.max(1) as f64, config.max_lr, config.dividing_factor);
            let mut fb = forward_backward(params, &batch, &masks, !freeze)?;
            let finite = fb.loss.total.is_finite();
            let clipped = if finite {
                clip_gradient_norm(&mut fb.grads, config.clip_norm)
            } else {
                Err(TrainError::NonFiniteGradient)
            };
            let record = match clipped {
                Ok(norm) => {
                    adam.update(params, &fb.grads, sched, &trainable);
                    params.update_running_stats(&fb.bn_stats, !freeze);
                    sum.nll += fb.loss.nll;
                    sum.ar += fb.loss.ar;
                    sum.tar += fb.loss.tar;
                    sum.total += fb.loss.total;
                    counted += 1;
                    StepRecord {
                        epoch,
                        step: report.steps,
                        lr: sched.lr,
                        momentum: sched.momentum,
                        loss: fb.loss,
                        grad_norm: norm,
                        skipped: false,
                    }
                }
                Err(_) => {
                    log::warn!("skipping step {} with non-finite gradient", report.steps);
                    report.skipped += 1;
                    StepRecord {
                        epoch,
                        step: report.steps,
                        lr: sched.lr,
                        momentum: sched.momentum,
                        loss: fb.loss,
                        grad_norm: f64::NAN,
                        skipped: true,
                    }
                }
            };
            observer.on_step(&record);
            report.steps += 1;
            if report.skipped as f64 > MAX_SKIPPED_FRACTION * total_steps as f64 {
                return Err(TrainError::TooManySkipped {
                    skipped: report.skipped,
                    steps: report.steps,
                });
            }
        }
        let n = counted.max(1) as f64;
        let mean = LossBreakdown {
            nll: sum.nll / n,
            ar: sum.ar / n,
            tar: sum.tar / n,
            total: sum.total / n,
        };
        log::info!(
            "epoch {epoch}: total {:.4} (nll {:.4}, ar {:.4}, tar {:.4})",
            mean.total,
            mean.nll,
            mean.ar,
            mean.tar
        );
        observer.on_epoch(epoch, &mean, params);
        report.epoch_losses.push(mean);
    }
    report.reversed_fraction = reversed as f64 / seen.max(1) as f64;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        let s = one_cycle(0.0, 1e-3, 10.0);
        assert!((s.lr - 1e-4).abs() < 1e-12 && (s.momentum - 0.8).abs() < 1e-12);
        let s = one_cycle(0.49, 1e-3, 10.0);
        assert!((s.lr - 1e-3).abs() < 1e-12 && (s.momentum - 0.6).abs() < 1e-12);
        let s = one_cycle(1.0, 1e-3, 10.0);
        assert!((s.lr - 1e-6).abs() < 1e-12 && (s.momentum - 0.8).abs() < 1e-12);
        let s = one_cycle(0.98, 1e-3, 10.0);
        assert!((s.lr - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn clipping() {
        let c = crate::net::ModelConfig {
            input_bits: 2,
            embed_dim: 1,
            hidden_dim: 1,
            num_layers: 2,
            vocab_size: 5,
            ..Default::default()
        };
        let mut g = Weights::zeros(&c);
        g.fc2_b[0] = 0.6;
        assert!((clip_gradient_norm(&mut g, 0.3).unwrap() - 0.6).abs() < 1e-15);
        assert!((g.fc2_b[0] - 0.3).abs() < 1e-15);
        g.fc2_b[0] = 0.1;
        clip_gradient_norm(&mut g, 0.3).unwrap();
        assert_eq!(g.fc2_b[0], 0.1);
        let mut z = Weights::zeros(&c);
        assert_eq!(clip_gradient_norm(&mut z, 0.3).unwrap(), 0.0);
        z.fc1_b[0] = f64::NAN;
        assert!(matches!(clip_gradient_norm(&mut z, 0.3), Err(TrainError::NonFiniteGradient)));
    }

    #[test]
    fn batch_count_matches_windows() {
        for (n, b) in [(10, 3), (1000, 7), (351, 1), (5, 10)] {
            let ex: Vec<TrainExample> = (0..n)
                .map(|_| TrainExample {
                    fingerprint: BitFingerprint::zeros(4),
                    forward: vec![0, 1, 3],
                    reversed: vec![0, 2, 3],
                })
                .collect();
            let batches = epoch_batches(&ex, b, &mut ChaCha8Rng::seed_from_u64(1));
            assert_eq!(batches.len(), steps_per_epoch(n, b));
            assert_eq!(batches.iter().map(Vec::len).sum::<usize>(), n);
        }
    }
}
