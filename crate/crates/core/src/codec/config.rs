use serde::{Deserialize, Serialize};

use crate::codec::CodecError;

/// Shape of the toy codec and its quantizer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodecConfig {
    pub sample_rate: u32,
    /// Downsampling factor of each encoder stage, in encoder order.
    pub strides: Vec<usize>,
    pub latent_dim: usize,
    /// Channel width before the first stage and after each stage (`strides.len() + 1` entries).
    pub channels: Vec<usize>,
    pub codebook_size: usize,
    pub max_layers: usize,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self::toy()
    }
}

impl CodecConfig {
    /// 8 kHz, strides (2, 2, 2), D = 32, K = 1024.
    pub fn toy() -> Self {
        Self {
            sample_rate: 8000,
            strides: vec![2, 2, 2],
            latent_dim: 32,
            channels: vec![8, 16, 32, 32],
            codebook_size: 1024,
            max_layers: 32,
        }
    }

    /// 24 kHz, strides (2, 4, 5, 8), 75 frames per second.
    pub fn full_scale() -> Self {
        Self {
            sample_rate: 24000,
            strides: vec![2, 4, 5, 8],
            latent_dim: 128,
            channels: vec![32, 64, 128, 256, 512],
            codebook_size: 1024,
            max_layers: 32,
        }
    }

    /// Toy shape with 2-dimensional latents, 256-entry codebooks and two layers.
    pub fn acceptance() -> Self {
        Self { latent_dim: 2, codebook_size: 256, max_layers: 2, ..Self::toy() }
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        let bad = |m: String| Err(CodecError::InvalidConfig(m));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive".into());
        }
        if self.strides.is_empty() || self.strides.iter().any(|&s| s == 0 || s > 255) {
            return bad(format!("strides must be a non-empty list of values in 1..=255, got {:?}", self.strides));
        }
        if self.strides.len() > 255 {
            return bad("at most 255 strides".into());
        }
        if self.latent_dim == 0 || self.latent_dim > u16::MAX as usize {
            return bad(format!("latent_dim must be in 1..=65535, got {}", self.latent_dim));
        }
        if self.channels.len() != self.strides.len() + 1 || self.channels.contains(&0) {
            return bad(format!(
                "channels needs {} positive entries, got {:?}",
                self.strides.len() + 1,
                self.channels
            ));
        }
        let k = self.codebook_size;
        if k < 2 || !k.is_power_of_two() || k > u16::MAX as usize {
            return bad(format!("codebook_size must be a power of two in 2..=32768, got {k}"));
        }
        if self.max_layers == 0 || self.max_layers > 255 {
            return bad(format!("max_layers must be in 1..=255, got {}", self.max_layers));
        }
        Ok(())
    }

    pub fn stride_product(&self) -> usize {
        self.strides.iter().product()
    }

    /// Latent frames per second.
    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / self.stride_product() as f64
    }

    /// Bits needed for one code index, `log2 K`.
    pub fn bits_per_code(&self) -> u32 {
        self.codebook_size.trailing_zeros()
    }

    /// Latent frames produced for `len` input samples.
    pub fn frames_for(&self, len: usize) -> usize {
        len.div_ceil(self.stride_product())
    }
}
