//! Toy convolutional codec, bandwidth arithmetic and the compressed stream format.

mod bandwidth;
mod bitstream;
mod config;
mod model;
mod weights;

pub use bandwidth::{bandwidth_to_nq, valid_bandwidths};
pub use bitstream::{pack_bitstream, unpack_bitstream, BitstreamHeader, BITSTREAM_VERSION, HEADER_FIXED_LEN};
pub use config::CodecConfig;
pub use model::{ModelVars, ParamTensor, ToyCodecModel};
pub use weights::{load_weights, read_weights, save_weights, write_weights, WEIGHTS_FORMAT_VERSION};

use crate::numerics::NumericsError;
use crate::quantizer::QuantizerError;
use crate::signal::SignalError;

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("invalid codec configuration: {0}")]
    InvalidConfig(String),
    #[error("bandwidth {bandwidth} kbps is not achievable; valid values: {}", format_list(.valid))]
    InvalidBandwidth { bandwidth: f64, valid: Vec<f64> },
    #[error("sample rate mismatch: model expects {expected} Hz, input is {found} Hz")]
    SampleRateMismatch { expected: u32, found: u32 },
    #[error("input of {len} samples is shorter than the stride product {min}")]
    InputTooShort { len: usize, min: usize },
    #[error("latent dimension {found} does not match the model dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("bitstream: bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("bitstream: version {found} is not supported (expected {expected})")]
    VersionMismatch { expected: u16, found: u16 },
    #[error("bitstream: truncated, needed {needed} bytes but only {available} are present")]
    Truncated { needed: usize, available: usize },
    #[error("bitstream: {0} trailing bytes after the payload")]
    TrailingBytes(usize),
    #[error("bitstream: invalid header: {0}")]
    InvalidHeader(String),
    #[error("frame {frame}, layer {layer}: index {index} is out of range for K = {size}")]
    IndexOutOfRange { frame: usize, layer: usize, index: u32, size: usize },
    #[error("weight file: {0}")]
    WeightFile(String),
    #[error(transparent)]
    Quantizer(#[from] QuantizerError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_list(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(", ")
}
