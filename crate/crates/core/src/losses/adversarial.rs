use crate::losses::LossError;
use crate::numerics::{Graph, Var};
use crate::scalar::Scalar;

/// Floor on the mean absolute real feature in the feature-matching denominator.
pub const FEATURE_FLOOR: f64 = 1e-8;

/// Per sub-discriminator logits and the feature maps of each of its layers.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorOutput<T> {
    pub logits: Vec<T>,
    /// `features[k][l]` is layer `l` of sub-discriminator `k`, flattened.
    pub features: Vec<Vec<Vec<T>>>,
}

fn hinge<T: Scalar>(v: T) -> T {
    v.max(T::zero())
}

/// `mean_k max(0, 1 - fake_k)`.
pub fn adversarial_gen_loss<T: Scalar>(fake_logits: &[T]) -> Result<T, LossError> {
    if fake_logits.is_empty() {
        return Err(LossError::EmptyLogits);
    }
    let sum: T = fake_logits.iter().map(|&l| hinge(T::one() - l)).sum();
    Ok(sum / T::of_usize(fake_logits.len()))
}

/// `mean_k [max(0, 1 - real_k) + max(0, 1 + fake_k)]`.
pub fn discriminator_hinge_loss<T: Scalar>(real_logits: &[T], fake_logits: &[T]) -> Result<T, LossError> {
    if real_logits.len() != fake_logits.len() {
        return Err(LossError::LogitCountMismatch(real_logits.len(), fake_logits.len()));
    }
    if real_logits.is_empty() {
        return Err(LossError::EmptyLogits);
    }
    let sum: T = real_logits
        .iter()
        .zip(fake_logits)
        .map(|(&r, &f)| hinge(T::one() - r) + hinge(T::one() + f))
        .sum();
    Ok(sum / T::of_usize(real_logits.len()))
}

fn check_features<T, U>(real: &[Vec<Vec<T>>], fake: &[Vec<U>], len: impl Fn(&U) -> usize) -> Result<usize, LossError> {
    if real.len() != fake.len() || real.is_empty() {
        return Err(LossError::FeatureShape(format!("{} real vs {} fake sub-discriminators", real.len(), fake.len())));
    }
    let mut maps = 0;
    for (k, (r, f)) in real.iter().zip(fake).enumerate() {
        if r.len() != f.len() {
            return Err(LossError::FeatureShape(format!("sub-discriminator {k}: {} vs {} layers", r.len(), f.len())));
        }
        for (l, (rm, fm)) in r.iter().zip(f).enumerate() {
            if rm.len() != len(fm) || rm.is_empty() {
                return Err(LossError::FeatureShape(format!(
                    "sub-discriminator {k}, layer {l}: {} vs {} elements",
                    rm.len(),
                    len(fm)
                )));
            }
            maps += 1;
        }
    }
    if maps == 0 {
        return Err(LossError::FeatureShape("no feature maps".into()));
    }
    Ok(maps)
}

fn mean_abs<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|x| x.abs()).sum::<T>() / T::of_usize(v.len())
}

/// Feature matching: over every sub-discriminator `k` and layer `l`,
/// `mean|F_kl(x) - F_kl(x_hat)| / max(mean|F_kl(x)|, 1e-8)`, averaged over all maps.
pub fn feature_matching_loss<T: Scalar>(
    real: &DiscriminatorOutput<T>,
    fake: &DiscriminatorOutput<T>,
) -> Result<T, LossError> {
    let maps = check_features(&real.features, &fake.features, |m: &Vec<T>| m.len())?;
    let mut total = T::zero();
    for (r, f) in real.features.iter().zip(&fake.features) {
        for (rm, fm) in r.iter().zip(f) {
            let diff = rm.iter().zip(fm).map(|(&a, &b)| (a - b).abs()).sum::<T>() / T::of_usize(rm.len());
            total += diff / mean_abs(rm).max(T::of(FEATURE_FLOOR));
        }
    }
    Ok(total / T::of_usize(maps))
}

/// Generator hinge loss over scalar logit nodes.
pub fn adversarial_gen_loss_graph<T: Scalar>(g: &mut Graph<T>, fake_logits: &[Var]) -> Result<Var, LossError> {
    if fake_logits.is_empty() {
        return Err(LossError::EmptyLogits);
    }
    let terms: Vec<Var> = fake_logits
        .iter()
        .map(|&l| {
            let m = g.scale(l, -T::one());
            let m = g.add_scalar(m, T::one());
            g.max_scalar(m, T::zero())
        })
        .collect();
    let total = g.add_all(&terms).expect("non-empty");
    Ok(g.scale(total, T::one() / T::of_usize(terms.len())))
}

/// Discriminator hinge loss over scalar logit nodes.
pub fn discriminator_hinge_loss_graph<T: Scalar>(
    g: &mut Graph<T>,
    real_logits: &[Var],
    fake_logits: &[Var],
) -> Result<Var, LossError> {
    if real_logits.len() != fake_logits.len() {
        return Err(LossError::LogitCountMismatch(real_logits.len(), fake_logits.len()));
    }
    if real_logits.is_empty() {
        return Err(LossError::EmptyLogits);
    }
    let mut terms = Vec::with_capacity(2 * real_logits.len());
    for (&r, &f) in real_logits.iter().zip(fake_logits) {
        let a = g.scale(r, -T::one());
        let a = g.add_scalar(a, T::one());
        terms.push(g.max_scalar(a, T::zero()));
        let b = g.add_scalar(f, T::one());
        terms.push(g.max_scalar(b, T::zero()));
    }
    let total = g.add_all(&terms).expect("non-empty");
    Ok(g.scale(total, T::one() / T::of_usize(real_logits.len())))
}

/// Feature matching with constant real features and differentiable fake features.
pub fn feature_matching_loss_graph<T: Scalar>(
    g: &mut Graph<T>,
    real: &[Vec<Vec<T>>],
    fake: &[Vec<Var>],
) -> Result<Var, LossError> {
    let maps = {
        let g: &Graph<T> = g;
        check_features(real, fake, |v: &Var| g.shape(*v).len())?
    };
    let mut terms = Vec::with_capacity(maps);
    for (r, f) in real.iter().zip(fake) {
        for (rm, &fm) in r.iter().zip(f) {
            let shape = g.shape(fm);
            let rv = g.constant(rm.clone(), shape.rows, shape.cols);
            let d = g.sub(rv, fm);
            let d = g.abs(d);
            let d = g.mean(d);
            let denom = mean_abs(rm).max(T::of(FEATURE_FLOOR));
            terms.push(g.scale(d, T::one() / denom));
        }
    }
    let total = g.add_all(&terms).expect("non-empty");
    Ok(g.scale(total, T::one() / T::of_usize(maps)))
}
