//! Signal-level metrics, codebook usage entropy and evaluation reports.

mod distance;
mod report;

pub use distance::{mel_distance, si_sdr, stft_distance, SI_SDR_CAP_DB, STFT_WINDOWS};
pub use report::{
    clip_metrics, evaluate, evaluate_sampled, pooled_entropies, ClipMetrics, EvalReport, EvalReportDelta,
};

use crate::codec::CodecError;
use crate::quantizer::QuantizerError;
use crate::signal::SignalError;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("signal lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("reference signal has zero energy")]
    ZeroReference,
    #[error("signal of {len} samples is shorter than the smallest analysis window ({min})")]
    SignalTooShort { len: usize, min: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Quantizer(#[from] QuantizerError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}
