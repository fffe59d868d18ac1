//! Training objective: reconstruction, codebook and adversarial terms and
//! their weighted totals.

mod adversarial;
mod reconstruction;
mod weights;

pub use adversarial::{
    adversarial_gen_loss, adversarial_gen_loss_graph, discriminator_hinge_loss, discriminator_hinge_loss_graph,
    feature_matching_loss, feature_matching_loss_graph, DiscriminatorOutput, FEATURE_FLOOR,
};
pub use reconstruction::{
    mel_scales, multiscale_mel_loss, multiscale_mel_loss_graph, time_l1, time_l1_graph, LOG_FLOOR, MEL_WINDOWS,
};
pub use weights::{discriminator_total, generator_total, LossWeights};

use crate::numerics::NumericsError;
use crate::signal::SignalError;

#[derive(Debug, thiserror::Error)]
pub enum LossError {
    #[error("signal lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("sample rates differ: {0} Hz vs {1} Hz")]
    SampleRateMismatch(u32, u32),
    #[error("signal of {len} samples is shorter than the smallest window ({min})")]
    SignalTooShort { len: usize, min: usize },
    #[error("logit list is empty")]
    EmptyLogits,
    #[error("real and fake logit counts differ: {0} vs {1}")]
    LogitCountMismatch(usize, usize),
    #[error("feature shape mismatch: {0}")]
    FeatureShape(String),
    #[error("loss weight {name} must be finite and non-negative, got {value}")]
    InvalidWeight { name: &'static str, value: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}
