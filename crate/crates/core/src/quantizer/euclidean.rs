//! Deterministic nearest-neighbour codebook used as the baseline.

use rand::Rng;

use crate::quantizer::{QuantizerError, UsageHistogram};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanCodebook<T> {
    size: usize,
    dim: usize,
    embeddings: Vec<T>,
    /// Exponential moving average of per-code usage counts, when tracked.
    pub usage_ema: Option<Vec<T>>,
}

impl<T: Scalar> EuclideanCodebook<T> {
    pub fn new(size: usize, dim: usize, embeddings: Vec<T>) -> Result<Self, QuantizerError> {
        if size == 0 || dim == 0 {
            return Err(QuantizerError::Shape("codebook needs at least one code and one dimension".into()));
        }
        if embeddings.len() != size * dim {
            return Err(QuantizerError::Shape(format!("expected {size}x{dim} embeddings")));
        }
        if embeddings.iter().any(|v| !v.is_finite()) {
            return Err(QuantizerError::NonFinite);
        }
        Ok(Self { size, dim, embeddings, usage_ema: None })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embeddings(&self) -> &[T] {
        &self.embeddings
    }

    pub fn embeddings_mut(&mut self) -> &mut [T] {
        &mut self.embeddings
    }

    pub fn embedding(&self, k: usize) -> &[T] {
        &self.embeddings[k * self.dim..(k + 1) * self.dim]
    }

    /// Folds one batch of usage counts into the moving average.
    pub fn update_usage_ema(&mut self, hist: &UsageHistogram, decay: T) {
        let ema = self.usage_ema.get_or_insert_with(|| vec![T::zero(); hist.counts().len()]);
        for (e, &c) in ema.iter_mut().zip(hist.counts()) {
            *e = decay * *e + (T::one() - decay) * T::of(c as f64);
        }
    }

    /// Re-seeds codes whose usage EMA is below `threshold` with random rows of
    /// `samples` (frame-major, `dim` wide). Returns how many codes were replaced.
    pub fn replace_dead_codes<R: Rng>(&mut self, threshold: T, samples: &[T], rng: &mut R) -> usize {
        let Some(ema) = &self.usage_ema else { return 0 };
        let n_samples = samples.len() / self.dim;
        if n_samples == 0 {
            return 0;
        }
        let dead: Vec<usize> = ema.iter().enumerate().filter(|(_, &u)| u < threshold).map(|(k, _)| k).collect();
        for &k in &dead {
            let src = rng.gen_range(0..n_samples);
            let row = samples[src * self.dim..(src + 1) * self.dim].to_vec();
            self.embeddings[k * self.dim..(k + 1) * self.dim].copy_from_slice(&row);
        }
        dead.len()
    }
}

/// Index minimizing squared Euclidean distance; ties resolve to the lowest index.
pub fn nearest_neighbor<T: Scalar>(z: &[T], cb: &EuclideanCodebook<T>) -> usize {
    assert_eq!(z.len(), cb.dim(), "latent dimension must match the codebook");
    nearest_row(z, cb.embeddings(), cb.dim())
}

pub(crate) fn nearest_row<T: Scalar>(z: &[T], rows: &[T], dim: usize) -> usize {
    let mut best = 0;
    let mut best_dist = T::infinity();
    for (k, row) in rows.chunks_exact(dim).enumerate() {
        let mut dist = T::zero();
        for (&a, &b) in z.iter().zip(row) {
            let d = a - b;
            dist += d * d;
        }
        if dist < best_dist {
            best = k;
            best_dist = dist;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn exact_match_and_ties() {
        let emb: Vec<f64> = (0..10).flat_map(|k| vec![k as f64, -(k as f64)]).collect();
        let cb = EuclideanCodebook::new(10, 2, emb).unwrap();
        assert_eq!(nearest_neighbor(&[3.0, -3.0], &cb), 3);

        let cb = EuclideanCodebook::new(2, 1, vec![-1.0, 1.0]).unwrap();
        assert_eq!(nearest_neighbor(&[0.0], &cb), 0);
    }

    #[test]
    fn dead_code_replacement() {
        let mut cb = EuclideanCodebook::new(3, 1, vec![0.0, 1.0, 2.0]).unwrap();
        let hist = UsageHistogram::from_counts(vec![10, 0, 5]);
        cb.update_usage_ema(&hist, 0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let replaced = cb.replace_dead_codes(0.5, &[7.0, 7.0], &mut rng);
        assert_eq!(replaced, 1);
        assert_eq!(cb.embeddings(), &[0.0, 7.0, 2.0]);
    }
}
