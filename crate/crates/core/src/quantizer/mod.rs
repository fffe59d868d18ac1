//! Normal-distribution and Euclidean codebooks, residual quantization and
//! codebook usage statistics.

mod checkpoint;
mod euclidean;
mod loss;
mod normal;
mod residual;
mod types;
mod usage;

pub use checkpoint::{load_codebooks, read_codebooks, save_codebooks, write_codebooks, CODEBOOK_FORMAT_VERSION};
pub use euclidean::{nearest_neighbor, EuclideanCodebook};
pub use loss::{codebook_loss, codebook_loss_value, straight_through};
pub use normal::{
    log_density_scores, reparameterize, select_code, NormalCodebook, PreparedNormal, SIGMA_MAX, SIGMA_MIN,
};
pub use residual::{
    decode_indices, fill_standard_normal, init_codebooks, quantize_infer, quantize_traced, quantize_train,
    quantize_train_with_noise, Codebook, QuantizationResult, QuantizationTrace, QuantizerInit, QuantizerKind,
    ResidualQuantizer,
};
pub use types::{CodeIndexGrid, LatentSequence};
pub use usage::{usage_entropy, LayerUsage, UsageHistogram};

#[derive(Debug, thiserror::Error)]
pub enum QuantizerError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("latent dimension {found} does not match codebook dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in quantizer input or parameters")]
    NonFinite,
    #[error("code index {index} out of range for a codebook of {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("frame {frame}, layer {layer}: code index {index} out of range for a codebook of {size}")]
    DecodeIndex { frame: usize, layer: usize, index: usize, size: usize },
    #[error("requested {requested} active layers but the quantizer has {available}")]
    ActiveLayers { requested: usize, available: usize },
    #[error("codebook initialization needs {needed} sample frames, got {available}")]
    NotEnoughSamples { needed: usize, available: usize },
    #[error("usage histogram is empty")]
    EmptyHistogram,
    #[error("codebook file: bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("codebook file: unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("codebook file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
