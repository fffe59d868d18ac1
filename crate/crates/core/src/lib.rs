//! Normal-distribution vector quantization (NDVQ) for a toy neural audio codec.

pub mod codec;
pub mod config;
pub mod losses;
pub mod metrics;
pub mod numerics;
pub mod quantizer;
pub mod scalar;
pub mod signal;
pub mod training;

pub type AudioBuffer32 = signal::AudioBuffer<f32>;
pub type AudioBuffer64 = signal::AudioBuffer<f64>;
pub type Graph32 = numerics::Graph<f32>;
pub type Graph64 = numerics::Graph<f64>;
pub type Model32 = codec::ToyCodecModel<f32>;
pub type Model64 = codec::ToyCodecModel<f64>;
pub type Quantizer32 = quantizer::ResidualQuantizer<f32>;
pub type Quantizer64 = quantizer::ResidualQuantizer<f64>;
