use crate::numerics::{Graph, Var};
use crate::scalar::Scalar;

/// Codebook loss `|sg[mu] - z|^2 + beta |mu - sg[z]|^2 + gamma |sigma|^2` for
/// row-aligned `frames x D` matrices, summed over dimensions and averaged over rows.
///
/// `z` receives gradient only from the first term, `mu` only from the second and
/// `sigma` only from the third. Pass `None` for `sigma` on Euclidean codebooks.
pub fn codebook_loss<T: Scalar>(
    graph: &mut Graph<T>,
    z: Var,
    mu: Var,
    sigma: Option<Var>,
    beta: T,
    gamma: T,
) -> Var {
    let rows = graph.shape(z).rows;
    assert_eq!(graph.shape(z), graph.shape(mu), "codebook_loss: z and mu differ in shape");
    let mu_sg = graph.detach(mu);
    let z_sg = graph.detach(z);
    let d1 = graph.sub(mu_sg, z);
    let sq1 = graph.square(d1);
    let commit = graph.sum(sq1);
    let d2 = graph.sub(mu, z_sg);
    let sq2 = graph.square(d2);
    let pull = graph.sum(sq2);
    let pull = graph.scale(pull, beta);
    let mut total = graph.add(commit, pull);
    if let Some(sigma) = sigma {
        assert_eq!(graph.shape(sigma), graph.shape(mu), "codebook_loss: sigma and mu differ in shape");
        let sq3 = graph.square(sigma);
        let reg = graph.sum(sq3);
        let reg = graph.scale(reg, gamma);
        total = graph.add(total, reg);
    }
    graph.scale(total, T::one() / T::of_usize(rows.max(1)))
}

/// Value of the codebook loss for a single vector.
pub fn codebook_loss_value<T: Scalar>(z: &[T], mu: &[T], sigma: &[T], beta: T, gamma: T) -> T {
    assert!(z.len() == mu.len() && z.len() == sigma.len(), "codebook_loss_value: length mismatch");
    let mut dist = T::zero();
    let mut reg = T::zero();
    for ((&zi, &mi), &si) in z.iter().zip(mu).zip(sigma) {
        dist += (mi - zi) * (mi - zi);
        reg += si * si;
    }
    dist + beta * dist + gamma * reg
}

/// Forward value `quantized`; the backward pass hands the downstream gradient
/// to `z` unchanged and nothing to the codebooks.
pub fn straight_through<T: Scalar>(graph: &mut Graph<T>, z: Var, quantized: &[T]) -> Var {
    graph.pass_through(z, quantized.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_example() {
        assert!((codebook_loss_value::<f64>(&[1.0], &[0.0], &[2.0], 0.25, 1e-5) - 1.25004).abs() < 1e-12);
        let v = codebook_loss_value(&[0.3, 0.3], &[0.3, 0.3], &[1e-4, 1e-4], 0.25, 1e-5);
        assert!(v < 1e-12);
    }

    #[test]
    fn gradient_partition() {
        let mut g = Graph::<f64>::new();
        let z = g.param(vec![1.0, -2.0], 1, 2);
        let mu = g.param(vec![0.5, 0.0], 1, 2);
        let sigma = g.param(vec![2.0, 3.0], 1, 2);
        let loss = codebook_loss(&mut g, z, mu, Some(sigma), 0.25, 1e-5);
        assert!((g.scalar(loss) - (1.25 * (0.25 + 4.0) + 1e-5 * 13.0)).abs() < 1e-12);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(z), vec![1.0, -4.0]);
        assert_eq!(g.grad(mu), vec![-0.25, 1.0]);
        let gs = g.grad(sigma);
        assert!((gs[0] - 4e-5).abs() < 1e-15 && (gs[1] - 6e-5).abs() < 1e-15);
    }

    #[test]
    fn averages_over_rows() {
        let mut g = Graph::<f64>::new();
        let z = g.constant(vec![1.0, 3.0], 2, 1);
        let mu = g.constant(vec![0.0, 0.0], 2, 1);
        let loss = codebook_loss(&mut g, z, mu, None, 0.0, 0.0);
        assert_eq!(g.scalar(loss), 5.0);
    }

    #[test]
    fn straight_through_routes_gradient_to_z() {
        let mut g = Graph::<f64>::new();
        let z = g.param(vec![0.2, 0.4], 1, 2);
        let q = straight_through(&mut g, z, &[1.0, -1.0]);
        assert_eq!(g.value(q), &[1.0, -1.0]);
        let sq = g.square(q);
        let loss = g.sum(sq);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(z), vec![2.0, -2.0]);
    }
}
