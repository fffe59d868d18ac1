use crate::numerics::{Graph, NumericsError, Var};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// `max_i |analytic_i - numeric_i| / max(1, |analytic_i|)`.
    pub max_relative_error: f64,
    pub worst_coordinate: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum GradCheckError {
    #[error("finite-difference step must be positive")]
    InvalidStep,
    #[error("function value is not finite at coordinate {coordinate:?}")]
    NonFinite { coordinate: Option<usize> },
    #[error(transparent)]
    Graph(#[from] NumericsError),
}

/// Compares reverse-mode gradients with central differences.
///
/// `f` receives a fresh graph and a `1 x n` parameter node holding the point and
/// must return a scalar node.
pub fn grad_check<T, F>(f: F, point: &[T], step: T) -> Result<GradCheckReport, GradCheckError>
where
    T: Scalar,
    F: Fn(&mut Graph<T>, Var) -> Result<Var, NumericsError>,
{
    if !(step > T::zero()) {
        return Err(GradCheckError::InvalidStep);
    }
    let mut graph = Graph::new();
    let x = graph.param(point.to_vec(), 1, point.len());
    let out = f(&mut graph, x)?;
    if !graph.scalar(out).is_finite() {
        return Err(GradCheckError::NonFinite { coordinate: None });
    }
    graph.backward(out)?;
    let analytic = graph.grad(x);

    let eval = |p: Vec<T>| -> Result<f64, GradCheckError> {
        let mut g = Graph::new();
        let v = g.constant(p, 1, point.len());
        let out = f(&mut g, v)?;
        Ok(g.scalar(out).to_f64_lossy())
    };

    let h = step.to_f64_lossy();
    let mut report = GradCheckReport { max_relative_error: 0.0, worst_coordinate: 0 };
    for i in 0..point.len() {
        let mut plus = point.to_vec();
        plus[i] += step;
        let mut minus = point.to_vec();
        minus[i] -= step;
        let (fp, fm) = (eval(plus)?, eval(minus)?);
        if !fp.is_finite() || !fm.is_finite() {
            return Err(GradCheckError::NonFinite { coordinate: Some(i) });
        }
        let numeric = (fp - fm) / (2.0 * h);
        let a = analytic[i].to_f64_lossy();
        let err = (a - numeric).abs() / a.abs().max(1.0);
        if err > report.max_relative_error {
            report = GradCheckReport { max_relative_error: err, worst_coordinate: i };
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_one() {
        let report = grad_check(|g, x| Ok(g.square(x)), &[1.0f64], 1e-5).unwrap();
        assert!(report.max_relative_error < 1e-6);
    }

    #[test]
    fn reports_non_finite_coordinate() {
        // log(x) at x = 0.5 with a step that crosses zero on the minus side
        let err = grad_check(
            |g, x| {
                let l = g.log(x);
                Ok(g.sum(l))
            },
            &[2.0f64, 0.5],
            0.75,
        )
        .unwrap_err();
        assert!(matches!(err, GradCheckError::NonFinite { coordinate: Some(1) }), "{err:?}");
    }

    #[test]
    fn rejects_bad_step() {
        assert!(matches!(
            grad_check(|g, x| Ok(g.sum(x)), &[1.0f64], 0.0),
            Err(GradCheckError::InvalidStep)
        ));
    }
}
