use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::{ModelConfig, NetError};

#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    /// `(4·hidden, input)`, gate blocks in order input, forget, cell, output.
    pub w_ih: Array2<f64>,
    /// `(4·hidden, hidden)`
    pub w_hh: Array2<f64>,
    pub b_ih: Array1<f64>,
    pub b_hh: Array1<f64>,
}

impl Lstm {
    pub fn hidden(&self) -> usize {
        self.w_hh.ncols()
    }
}

/// All trainable tensors. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub bn1_gamma: Array1<f64>,
    pub bn1_beta: Array1<f64>,
    /// `(hidden, input_bits)`
    pub fc1_w: Array2<f64>,
    pub fc1_b: Array1<f64>,
    pub bn2_gamma: Array1<f64>,
    pub bn2_beta: Array1<f64>,
    /// `(hidden, hidden)`
    pub fc2_w: Array2<f64>,
    pub fc2_b: Array1<f64>,
    /// `(vocab, embed)`; also the output projection.
    pub embedding: Array2<f64>,
    pub lstm: Vec<Lstm>,
}

impl Weights {
    pub fn zeros(c: &ModelConfig) -> Weights {
        let (d, h, e, v) = (c.input_bits, c.hidden_dim, c.embed_dim, c.vocab_size);
        Weights {
            bn1_gamma: Array1::zeros(d),
            bn1_beta: Array1::zeros(d),
            fc1_w: Array2::zeros((h, d)),
            fc1_b: Array1::zeros(h),
            bn2_gamma: Array1::zeros(h),
            bn2_beta: Array1::zeros(h),
            fc2_w: Array2::zeros((h, h)),
            fc2_b: Array1::zeros(h),
            embedding: Array2::zeros((v, e)),
            lstm: (0..c.num_layers)
                .map(|l| {
                    let (i, n) = (c.layer_input(l), c.layer_hidden(l));
                    Lstm {
                        w_ih: Array2::zeros((4 * n, i)),
                        w_hh: Array2::zeros((4 * n, n)),
                        b_ih: Array1::zeros(4 * n),
                        b_hh: Array1::zeros(4 * n),
                    }
                })
                .collect(),
        }
    }

    /// `(name, data)` for every tensor, in [`ModelConfig::parameter_shapes`] order.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![
            ("encoder.bn1.weight".into(), slice_of(&self.bn1_gamma)),
            ("encoder.bn1.bias".into(), slice_of(&self.bn1_beta)),
            ("encoder.fc1.weight".into(), slice_of(&self.fc1_w)),
            ("encoder.fc1.bias".into(), slice_of(&self.fc1_b)),
            ("encoder.bn2.weight".into(), slice_of(&self.bn2_gamma)),
            ("encoder.bn2.bias".into(), slice_of(&self.bn2_beta)),
            ("encoder.fc2.weight".into(), slice_of(&self.fc2_w)),
            ("encoder.fc2.bias".into(), slice_of(&self.fc2_b)),
            ("decoder.embedding.weight".into(), slice_of(&self.embedding)),
        ];
        for (l, m) in self.lstm.iter().enumerate() {
            out.push((format!("decoder.lstm.{l}.weight_ih"), slice_of(&m.w_ih)));
            out.push((format!("decoder.lstm.{l}.weight_hh"), slice_of(&m.w_hh)));
            out.push((format!("decoder.lstm.{l}.bias_ih"), slice_of(&m.b_ih)));
            out.push((format!("decoder.lstm.{l}.bias_hh"), slice_of(&m.b_hh)));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = vec![
            ("encoder.bn1.weight".into(), mut1(&mut self.bn1_gamma)),
            ("encoder.bn1.bias".into(), mut1(&mut self.bn1_beta)),
            ("encoder.fc1.weight".into(), mut2(&mut self.fc1_w)),
            ("encoder.fc1.bias".into(), mut1(&mut self.fc1_b)),
            ("encoder.bn2.weight".into(), mut1(&mut self.bn2_gamma)),
            ("encoder.bn2.bias".into(), mut1(&mut self.bn2_beta)),
            ("encoder.fc2.weight".into(), mut2(&mut self.fc2_w)),
            ("encoder.fc2.bias".into(), mut1(&mut self.fc2_b)),
            ("decoder.embedding.weight".into(), mut2(&mut self.embedding)),
        ];
        for (l, m) in self.lstm.iter_mut().enumerate() {
            out.push((format!("decoder.lstm.{l}.weight_ih"), mut2(&mut m.w_ih)));
            out.push((format!("decoder.lstm.{l}.weight_hh"), mut2(&mut m.w_hh)));
            out.push((format!("decoder.lstm.{l}.bias_ih"), mut1(&mut m.b_ih)));
            out.push((format!("decoder.lstm.{l}.bias_hh"), mut1(&mut m.b_hh)));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sq_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|x| x * x)
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    pub fn scale(&mut self, k: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= k);
        }
    }

    pub fn add_assign(&mut self, other: &Weights) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
}

fn slice_of<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

fn mut1(a: &mut Array1<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}

fn mut2(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub config: ModelConfig,
    pub weights: Weights,
    pub bn1_mean: Array1<f64>,
    pub bn1_var: Array1<f64>,
    pub bn2_mean: Array1<f64>,
    pub bn2_var: Array1<f64>,
}

impl ModelParameters {
    /// Fresh parameters: affine and recurrent weights uniform in
    /// `±1/√fan_in`, embeddings normal(0, 0.01), batch-norm scale 1 and
    /// shift 0, zero biases except a forget-gate bias of 1.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<ModelParameters, NetError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Weights::zeros(config);
        w.bn1_gamma.fill(1.0);
        w.bn2_gamma.fill(1.0);
        fill_uniform(&mut w.fc1_w, &mut rng);
        fill_uniform(&mut w.fc2_w, &mut rng);
        let normal = Normal::new(0.0, 0.01).expect("valid normal");
        w.embedding.iter_mut().for_each(|x| *x = normal.sample(&mut rng));
        for m in &mut w.lstm {
            fill_uniform(&mut m.w_ih, &mut rng);
            fill_uniform(&mut m.w_hh, &mut rng);
            let n = m.hidden();
            m.b_ih.slice_mut(ndarray::s![n..2 * n]).fill(1.0);
        }
        Ok(ModelParameters {
            config: config.clone(),
            weights: w,
            bn1_mean: Array1::zeros(config.input_bits),
            bn1_var: Array1::ones(config.input_bits),
            bn2_mean: Array1::zeros(config.hidden_dim),
            bn2_var: Array1::ones(config.hidden_dim),
        })
    }

    /// Order-sensitive digest of the named tensors (all when `filter` accepts all).
    pub fn checksum(&self, filter: impl Fn(&str) -> bool) -> u64 {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for (name, t) in self.weights.tensors() {
            if filter(&name) {
                h.update(name.as_bytes());
                for x in t {
                    h.update(x.to_le_bytes());
                }
            }
        }
        if filter("encoder.bn1.running") {
            for x in self.bn1_mean.iter().chain(self.bn1_var.iter()) {
                h.update(x.to_le_bytes());
            }
        }
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().unwrap())
    }
}

fn fill_uniform(a: &mut Array2<f64>, rng: &mut impl Rng) {
    let bound = 1.0 / (a.ncols() as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("valid range");
    a.iter_mut().for_each(|x| *x = dist.sample(rng));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            input_bits: 8,
            embed_dim: 3,
            hidden_dim: 5,
            num_layers: 3,
            vocab_size: 7,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn tensor_order_matches_shapes() {
        let c = tiny();
        let p = ModelParameters::init(&c, 1).unwrap();
        let names: Vec<String> = p.weights.tensors().into_iter().map(|(n, _)| n).collect();
        let shapes = c.parameter_shapes();
        assert_eq!(names, shapes.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>());
        for ((_, t), (_, s)) in p.weights.tensors().iter().zip(&shapes) {
            assert_eq!(t.len(), s.iter().product::<usize>());
        }
        assert_eq!(p.weights.len(), c.parameter_count());
    }

    #[test]
    fn init_is_seeded() {
        let a = ModelParameters::init(&tiny(), 7).unwrap();
        let b = ModelParameters::init(&tiny(), 7).unwrap();
        let c = ModelParameters::init(&tiny(), 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.checksum(|_| true), c.checksum(|_| true));
        assert_eq!(a.weights.lstm[0].b_ih[5], 1.0);
    }
}
