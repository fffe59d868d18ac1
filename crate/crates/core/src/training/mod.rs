//! Synthetic data, the training loop, checkpoints and the NDVQ-versus-baseline comparison.

mod checkpoint;
mod config;
mod dataset;
mod discriminator;
mod run;
mod step;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CODEBOOK_FILE, CONFIG_FILE, WEIGHTS_FILE};
pub use config::{SigmaGradient, TrainConfig};
pub use dataset::{generate_dataset, split_dataset, SyntheticDatasetConfig, PEAK};
pub use discriminator::{DiscriminatorNodes, StftDiscriminator};
pub use run::{
    compare_kinds, compare_quantizers, train, ComparedRun, ComparisonSummary, QuantizerComparison, TrainOutcome,
    CHECKPOINTS_DIR, FINAL_CHECKPOINT_DIR, HISTORY_FILE, REPORT_FILE,
};
pub use step::{clip_grad_norm, train_step, LossRecord, TrainState};

use crate::codec::CodecError;
use crate::config::ConfigError;
use crate::losses::LossError;
use crate::metrics::MetricsError;
use crate::numerics::NumericsError;
use crate::quantizer::QuantizerError;
use crate::signal::SignalError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("step {step}: loss term {term} is not finite")]
    NonFiniteLoss { step: usize, term: &'static str },
    #[error("step {step}: gradient element {index} is not finite")]
    NonFiniteGradient { step: usize, index: usize },
    #[error("checkpoint {field} is {found} but the configuration says {expected}")]
    CheckpointMismatch { field: &'static str, found: usize, expected: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Quantizer(#[from] QuantizerError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
