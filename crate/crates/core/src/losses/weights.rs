use serde::{Deserialize, Serialize};

use crate::losses::LossError;
use crate::scalar::Scalar;

/// Weights of the generator and discriminator objectives plus the codebook
/// loss coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub lambda_t: f64,
    pub lambda_f: f64,
    pub lambda_c: f64,
    pub lambda_fm: f64,
    pub lambda_a: f64,
    pub lambda_d: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_t: 0.5,
            lambda_f: 0.5,
            lambda_c: 0.5,
            lambda_fm: 5.0,
            lambda_a: 1.0,
            lambda_d: 1.0,
            beta: 0.25,
            gamma: 1e-5,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), LossError> {
        for (name, value) in [
            ("lambda_t", self.lambda_t),
            ("lambda_f", self.lambda_f),
            ("lambda_c", self.lambda_c),
            ("lambda_fm", self.lambda_fm),
            ("lambda_a", self.lambda_a),
            ("lambda_d", self.lambda_d),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(LossError::InvalidWeight { name, value });
            }
        }
        Ok(())
    }
}

/// `lambda_t l_t + lambda_f l_f + lambda_a l_a + lambda_fm l_fm + lambda_c l_c`.
pub fn generator_total<T: Scalar>(l_t: T, l_f: T, l_a: T, l_fm: T, l_c: T, w: &LossWeights) -> T {
    T::of(w.lambda_t) * l_t + T::of(w.lambda_f) * l_f + T::of(w.lambda_a) * l_a + T::of(w.lambda_fm) * l_fm
        + T::of(w.lambda_c) * l_c
}

/// `lambda_d l_d`.
pub fn discriminator_total<T: Scalar>(l_d: T, w: &LossWeights) -> T {
    T::of(w.lambda_d) * l_d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals() {
        let w = LossWeights::default();
        assert_eq!(generator_total(0.0, 0.0, 0.0, 0.0, 0.0, &w), 0.0);
        assert_eq!(generator_total(1.0, 1.0, 1.0, 1.0, 1.0, &w), 7.5);
        let doubled = LossWeights { lambda_fm: 10.0, ..w };
        let base: f64 = generator_total(0.3, 0.2, 0.1, 0.7, 0.4, &w);
        assert!((generator_total(0.3, 0.2, 0.1, 0.7, 0.4, &doubled) - base - 0.7 * 5.0).abs() < 1e-12);
        assert_eq!(discriminator_total(0.0, &w), 0.0);
        assert_eq!(discriminator_total(2.0, &w), 2.0);
        assert_eq!(discriminator_total(3.0, &LossWeights { lambda_d: 0.0, ..w }), 0.0);
    }

    #[test]
    fn negative_weight_rejected() {
        let w = LossWeights { beta: -1.0, ..LossWeights::default() };
        assert!(matches!(w.validate(), Err(LossError::InvalidWeight { name: "beta", .. })));
        assert!(LossWeights::default().validate().is_ok());
    }
}
