use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first_moment: Vec<T>,
    pub second_moment: Vec<T>,
    pub step_count: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize) -> Self {
        Self { first_moment: vec![T::zero(); len], second_moment: vec![T::zero(); len], step_count: 0 }
    }
}

/// One bias-corrected Adam update.
///
/// Coordinates whose gradient is exactly zero keep both their parameter and
/// their moments, so unselected codebook rows stay where they are.
///
/// # Panics
/// If `params`, `grads` and the state moments differ in length.
pub fn adam_step<T: Scalar>(params: &mut [T], grads: &[T], state: &mut AdamState<T>, learning_rate: T, cfg: &AdamConfig) {
    assert_eq!(params.len(), grads.len(), "adam_step: params/grads length mismatch");
    assert_eq!(params.len(), state.first_moment.len(), "adam_step: state length mismatch");
    assert_eq!(params.len(), state.second_moment.len(), "adam_step: state length mismatch");
    state.step_count += 1;
    let step = state.step_count as i32;
    let b1 = T::of(cfg.beta1);
    let b2 = T::of(cfg.beta2);
    let eps = T::of(cfg.epsilon);
    let correction1 = T::one() - b1.powi(step);
    let correction2 = T::one() - b2.powi(step);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        if g == T::zero() {
            continue;
        }
        *m = b1 * *m + (T::one() - b1) * g;
        *v = b2 * *v + (T::one() - b2) * g * g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *p -= learning_rate * m_hat / (v_hat.sqrt() + eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_identity() {
        let mut params = vec![1.0f64, -2.0, 3.5];
        let mut state = AdamState::new(3);
        state.first_moment = vec![0.3, -0.1, 0.2];
        state.second_moment = vec![0.01, 0.02, 0.03];
        state.step_count = 17;
        let before = params.clone();
        adam_step(&mut params, &[0.0; 3], &mut state, 0.1, &AdamConfig::default());
        assert_eq!(params, before);
        assert_eq!(state.step_count, 18);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [3.0f64, -0.002, 250.0] {
            let mut params = vec![0.0];
            let mut state = AdamState::new(1);
            adam_step(&mut params, &[g], &mut state, 1e-3, &AdamConfig::default());
            let expected = -1e-3 * g.signum();
            assert!((params[0] - expected).abs() < 1e-3 * 1e-4, "g={g} got {}", params[0]);
        }
    }

    #[test]
    fn minimizes_shifted_quadratic() {
        let mut x = vec![0.0f64];
        let mut state = AdamState::new(1);
        for _ in 0..500 {
            let grad = 2.0 * (x[0] - 5.0);
            adam_step(&mut x, &[grad], &mut state, 0.1, &AdamConfig::default());
        }
        assert!((x[0] - 5.0).abs() < 0.1, "x = {}", x[0]);
    }

    #[test]
    #[should_panic(expected = "length mismatch")]
    fn length_mismatch_panics() {
        let mut params = vec![0.0f64; 2];
        let mut state = AdamState::new(2);
        adam_step(&mut params, &[1.0], &mut state, 0.1, &AdamConfig::default());
    }
}
