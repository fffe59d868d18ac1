//! Small learnable multi-scale STFT discriminator used to exercise the
//! adversarial and feature-matching terms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::ParamTensor;
use crate::losses::{LossError, LOG_FLOOR};
use crate::metrics::STFT_WINDOWS;
use crate::numerics::{Graph, Var};
use crate::scalar::Scalar;

/// Per scale `w` (hop `w/4`): features `F1 = log(|STFT| + 1e-5)` and
/// `F2 = F1 W`; the logit is the mean of `F2 v`.
#[derive(Debug, Clone, PartialEq)]
pub struct StftDiscriminator<T> {
    pub scales: Vec<usize>,
    pub hidden: usize,
    pub params: Vec<ParamTensor<T>>,
}

/// Logit and feature-map nodes of one discriminator pass.
#[derive(Debug, Clone)]
pub struct DiscriminatorNodes {
    pub logits: Vec<Var>,
    pub features: Vec<Vec<Var>>,
}

impl<T: Scalar> StftDiscriminator<T> {
    /// Uses every discriminator window not longer than `clip_length`.
    pub fn new(clip_length: usize, hidden: usize, seed: u64) -> Self {
        let scales: Vec<usize> = STFT_WINDOWS.iter().copied().filter(|&w| w <= clip_length).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for &w in &scales {
            let bins = w / 2 + 1;
            let mut init = |name: String, rows: usize, cols: usize| {
                let bound = 1.0 / (rows as f64).sqrt();
                let data = (0..rows * cols).map(|_| T::of(rng.gen_range(-bound..bound))).collect();
                params.push(ParamTensor { name, rows, cols, data });
            };
            init(format!("disc.s{w}.w"), bins, hidden);
            init(format!("disc.s{w}.v"), hidden, 1);
        }
        Self { scales, hidden, params }
    }

    pub fn register(&self, g: &mut Graph<T>, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| {
                if trainable {
                    g.param(p.data.clone(), p.rows, p.cols)
                } else {
                    g.constant(p.data.clone(), p.rows, p.cols)
                }
            })
            .collect()
    }

    pub fn forward(&self, g: &mut Graph<T>, vars: &[Var], x: Var) -> Result<DiscriminatorNodes, LossError> {
        let mut logits = Vec::with_capacity(self.scales.len());
        let mut features = Vec::with_capacity(self.scales.len());
        for (i, &w) in self.scales.iter().enumerate() {
            let mag = g.stft_magnitude(x, w, w / 4)?;
            let shifted = g.add_scalar(mag, T::of(LOG_FLOOR));
            let f1 = g.log(shifted);
            let f2 = g.matmul(f1, vars[2 * i]);
            let proj = g.matmul(f2, vars[2 * i + 1]);
            logits.push(g.mean(proj));
            features.push(vec![f1, f2]);
        }
        Ok(DiscriminatorNodes { logits, features })
    }

    /// Logit and feature values for a fixed signal.
    pub fn evaluate(&self, samples: &[T]) -> Result<(Vec<T>, Vec<Vec<Vec<T>>>), LossError> {
        let mut g = Graph::new();
        let vars = self.register(&mut g, false);
        let x = g.constant(samples.to_vec(), 1, samples.len());
        let out = self.forward(&mut g, &vars, x)?;
        let logits = out.logits.iter().map(|&l| g.scalar(l)).collect();
        let features = out
            .features
            .iter()
            .map(|maps| maps.iter().map(|&m| g.value(m).to_vec()).collect())
            .collect();
        Ok((logits, features))
    }

    pub fn n_params(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }
}
