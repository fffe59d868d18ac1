//! Codebooks whose entries are diagonal normal distributions.

use crate::quantizer::QuantizerError;
use crate::scalar::Scalar;

pub const SIGMA_MIN: f64 = 1e-4;
pub const SIGMA_MAX: f64 = 10.0;

/// `K` normal distributions over `D` dimensions, each a mean and a per-dimension
/// standard deviation stored as its logarithm.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalCodebook<T> {
    size: usize,
    dim: usize,
    means: Vec<T>,
    log_sigmas: Vec<T>,
}

impl<T: Scalar> NormalCodebook<T> {
    pub fn new(size: usize, dim: usize, means: Vec<T>, log_sigmas: Vec<T>) -> Result<Self, QuantizerError> {
        if size == 0 || dim == 0 {
            return Err(QuantizerError::Shape("codebook needs at least one code and one dimension".into()));
        }
        if means.len() != size * dim || log_sigmas.len() != size * dim {
            return Err(QuantizerError::Shape(format!("expected {size}x{dim} means and log-sigmas")));
        }
        if means.iter().chain(&log_sigmas).any(|v| !v.is_finite()) {
            return Err(QuantizerError::NonFinite);
        }
        let mut cb = Self { size, dim, means, log_sigmas };
        cb.clamp_sigmas();
        Ok(cb)
    }

    /// Codebook with every sigma equal to 1.
    pub fn with_unit_sigma(size: usize, dim: usize, means: Vec<T>) -> Result<Self, QuantizerError> {
        Self::new(size, dim, means, vec![T::zero(); size * dim])
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn means(&self) -> &[T] {
        &self.means
    }

    pub fn means_mut(&mut self) -> &mut [T] {
        &mut self.means
    }

    pub fn log_sigmas(&self) -> &[T] {
        &self.log_sigmas
    }

    /// Mutable log-sigmas; call [`Self::clamp_sigmas`] after writing.
    pub fn log_sigmas_mut(&mut self) -> &mut [T] {
        &mut self.log_sigmas
    }

    pub fn mean(&self, k: usize) -> &[T] {
        &self.means[k * self.dim..(k + 1) * self.dim]
    }

    pub fn log_sigma(&self, k: usize) -> &[T] {
        &self.log_sigmas[k * self.dim..(k + 1) * self.dim]
    }

    pub fn sigma(&self, k: usize) -> Vec<T> {
        self.log_sigma(k).iter().map(|v| v.exp()).collect()
    }

    /// Restricts every sigma to `[SIGMA_MIN, SIGMA_MAX]`.
    pub fn clamp_sigmas(&mut self) {
        let lo = T::of(SIGMA_MIN.ln());
        let hi = T::of(SIGMA_MAX.ln());
        for v in &mut self.log_sigmas {
            *v = v.max(lo).min(hi);
        }
    }

    /// Per-code constants for repeated scoring.
    pub fn prepare(&self) -> PreparedNormal<'_, T> {
        let half_log_two_pi = T::of(0.5 * (2.0 * std::f64::consts::PI).ln());
        let inv_sigmas = self.log_sigmas.iter().map(|v| (-*v).exp()).collect();
        let sigmas = self.log_sigmas.iter().map(|v| v.exp()).collect();
        let log_norms = (0..self.size)
            .map(|k| {
                let mut acc = T::zero();
                for &ls in self.log_sigma(k) {
                    acc -= ls + half_log_two_pi;
                }
                acc
            })
            .collect();
        PreparedNormal { codebook: self, inv_sigmas, sigmas, log_norms }
    }
}

/// A codebook with `1/sigma` and the normalizing terms precomputed.
#[derive(Debug)]
pub struct PreparedNormal<'a, T> {
    codebook: &'a NormalCodebook<T>,
    inv_sigmas: Vec<T>,
    sigmas: Vec<T>,
    log_norms: Vec<T>,
}

impl<T: Scalar> PreparedNormal<'_, T> {
    pub fn sigma(&self, k: usize) -> &[T] {
        let d = self.codebook.dim;
        &self.sigmas[k * d..(k + 1) * d]
    }

    pub fn mean(&self, k: usize) -> &[T] {
        self.codebook.mean(k)
    }

    pub fn score(&self, z: &[T], k: usize) -> T {
        let d = self.codebook.dim;
        let mu = self.codebook.mean(k);
        let inv = &self.inv_sigmas[k * d..(k + 1) * d];
        let mut quad = T::zero();
        for ((&zi, &mi), &si) in z.iter().zip(mu).zip(inv) {
            let u = (zi - mi) * si;
            quad += u * u;
        }
        self.log_norms[k] - T::of(0.5) * quad
    }

    pub fn scores(&self, z: &[T]) -> Vec<T> {
        (0..self.codebook.size).map(|k| self.score(z, k)).collect()
    }

    /// Index of the highest score; the lowest index wins ties.
    pub fn select(&self, z: &[T]) -> usize {
        let mut best = 0;
        let mut best_score = self.score(z, 0);
        for k in 1..self.codebook.size {
            let s = self.score(z, k);
            if s > best_score {
                best = k;
                best_score = s;
            }
        }
        best
    }
}

/// Log-density of `z` under every code:
/// `sum_i -0.5 ((z_i - mu_ki) / sigma_ki)^2 - log(sigma_ki sqrt(2 pi))`.
pub fn log_density_scores<T: Scalar>(z: &[T], cb: &NormalCodebook<T>) -> Vec<T> {
    assert_eq!(z.len(), cb.dim(), "latent dimension must match the codebook");
    cb.prepare().scores(z)
}

/// Most likely code for `z`; ties resolve to the lowest index.
pub fn select_code<T: Scalar>(z: &[T], cb: &NormalCodebook<T>) -> usize {
    assert_eq!(z.len(), cb.dim(), "latent dimension must match the codebook");
    cb.prepare().select(z)
}

/// Reparameterized sample `mu + epsilon * sigma`.
pub fn reparameterize<T: Scalar>(mu: &[T], sigma: &[T], epsilon: &[T]) -> Vec<T> {
    assert!(mu.len() == sigma.len() && mu.len() == epsilon.len(), "reparameterize: length mismatch");
    mu.iter().zip(sigma).zip(epsilon).map(|((&m, &s), &e)| m + e * s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cb1d(means: &[f64], sigmas: &[f64]) -> NormalCodebook<f64> {
        NormalCodebook::new(means.len(), 1, means.to_vec(), sigmas.iter().map(|s| s.ln()).collect()).unwrap()
    }

    #[test]
    fn score_at_mean_with_unit_sigma() {
        let d = 4;
        let means: Vec<f64> = (0..3 * d).map(|i| i as f64).collect();
        let cb = NormalCodebook::with_unit_sigma(3, d, means).unwrap();
        let z = cb.mean(1).to_vec();
        let scores = log_density_scores(&z, &cb);
        let expected = -(d as f64) * (2.0 * std::f64::consts::PI).sqrt().ln();
        assert!((scores[1] - expected).abs() < 1e-12);
        assert!(scores[1] > scores[0] && scores[1] > scores[2]);
    }

    #[test]
    fn hand_evaluated_selection() {
        let cb = cb1d(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]);
        assert_eq!(select_code(&[0.6], &cb), 1);
    }

    #[test]
    fn smaller_sigma_wins_at_shared_mean() {
        let cb = cb1d(&[0.0, 0.0], &[1.0, 2.0]);
        let s = log_density_scores(&[0.0], &cb);
        let c = (2.0 * std::f64::consts::PI).sqrt();
        assert!((s[0] + c.ln()).abs() < 1e-12);
        assert!((s[1] + (2.0 * c).ln()).abs() < 1e-12);
        assert_eq!(select_code(&[0.0], &cb), 0);
    }

    #[test]
    fn ties_pick_lowest_index() {
        let cb = NormalCodebook::with_unit_sigma(2, 2, vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        assert_eq!(select_code(&[3.0, -1.0], &cb), 0);
    }

    #[test]
    fn reparameterize_examples() {
        assert_eq!(reparameterize(&[1.0, 2.0], &[0.5, 0.5], &[2.0, -2.0]), vec![2.0, 1.0]);
        assert_eq!(reparameterize(&[1.0, -3.0], &[4.0, 4.0], &[0.0, 0.0]), vec![1.0, -3.0]);
        let out = reparameterize(&[0.25], &[SIGMA_MIN], &[-6.0]);
        assert!((out[0] - 0.25).abs() <= 6e-4);
    }

    #[test]
    fn sigma_is_clamped() {
        let cb = NormalCodebook::new(1, 2, vec![0.0, 0.0], vec![-50.0, 50.0]).unwrap();
        let s = cb.sigma(0);
        assert!((s[0] - SIGMA_MIN).abs() < 1e-12);
        assert!((s[1] - SIGMA_MAX).abs() < 1e-9);
    }

    #[test]
    fn wider_sigma_raises_score_outside_one_sigma() {
        // 1-D: with |z - mu| > sigma, d/dsigma of the score is (d^2/sigma^2 - 1)/sigma > 0.
        let z = [3.0];
        let mut prev = f64::NEG_INFINITY;
        for sigma in [0.5, 1.0, 1.5, 2.0, 2.5, 2.9] {
            let s = log_density_scores(&z, &cb1d(&[0.0], &[sigma]))[0];
            assert!(s > prev, "sigma {sigma}");
            prev = s;
        }
    }
}
