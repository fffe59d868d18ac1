use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::signal::AudioBuffer;
use crate::training::TrainError;

/// First RNG stream used for clip generation; clip `i` uses stream `DATA_STREAM + i`.
const DATA_STREAM: u64 = 1 << 32;
/// Peak amplitude of every generated clip.
pub const PEAK: f64 = 0.95;

/// Clips made of a few random sinusoids plus white noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticDatasetConfig {
    pub n_clips: usize,
    pub clip_length: usize,
    pub sample_rate: u32,
    pub min_components: usize,
    pub max_components: usize,
    /// Standard deviation of the additive noise before normalization, relative to unit-amplitude sinusoids.
    pub noise_level: f64,
    pub min_freq_hz: f64,
    pub max_freq_hz: f64,
}

impl Default for SyntheticDatasetConfig {
    fn default() -> Self {
        Self {
            n_clips: 80,
            clip_length: 2048,
            sample_rate: 8000,
            min_components: 2,
            max_components: 5,
            noise_level: 0.01,
            min_freq_hz: 60.0,
            max_freq_hz: 3000.0,
        }
    }
}

impl SyntheticDatasetConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if self.n_clips == 0 || self.clip_length == 0 || self.sample_rate == 0 {
            return bad("n_clips, clip_length and sample_rate must be positive".into());
        }
        if self.min_components == 0 || self.min_components > self.max_components {
            return bad(format!(
                "component range {}..={} is empty",
                self.min_components, self.max_components
            ));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(self.min_freq_hz > 0.0 && self.min_freq_hz <= self.max_freq_hz && self.max_freq_hz < nyquist) {
            return bad(format!(
                "frequency range {}..{} Hz must lie inside (0, {nyquist})",
                self.min_freq_hz, self.max_freq_hz
            ));
        }
        if !(self.noise_level.is_finite() && self.noise_level >= 0.0) {
            return bad(format!("noise_level must be non-negative, got {}", self.noise_level));
        }
        Ok(())
    }
}

/// Generates `cfg.n_clips` clips, each normalized to a peak of 0.95.
///
/// Clip `i` depends only on `seed` and `i`.
pub fn generate_dataset<T: Scalar>(
    cfg: &SyntheticDatasetConfig,
    seed: u64,
) -> Result<Vec<AudioBuffer<T>>, TrainError> {
    cfg.validate()?;
    (0..cfg.n_clips)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(DATA_STREAM + i as u64);
            let samples = synth_clip(cfg, &mut rng);
            Ok(AudioBuffer::new(samples.into_iter().map(T::of).collect(), cfg.sample_rate)?)
        })
        .collect()
}

fn synth_clip(cfg: &SyntheticDatasetConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rng.gen_range(cfg.min_components..=cfg.max_components);
    let sr = cfg.sample_rate as f64;
    let components: Vec<(f64, f64, f64)> = (0..n)
        .map(|_| {
            let f = rng.gen_range(cfg.min_freq_hz..=cfg.max_freq_hz);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let amp = rng.gen_range(0.2..=1.0);
            (f, phase, amp)
        })
        .collect();
    let mut x: Vec<f64> = (0..cfg.clip_length)
        .map(|t| {
            let tt = t as f64 / sr;
            components.iter().map(|&(f, p, a)| a * (std::f64::consts::TAU * f * tt + p).sin()).sum()
        })
        .collect();
    if cfg.noise_level > 0.0 {
        for v in &mut x {
            let e: f64 = rng.sample(StandardNormal);
            *v += cfg.noise_level * e;
        }
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let g = PEAK / peak;
        x.iter_mut().for_each(|v| *v *= g);
    }
    x
}

/// Splits off the last 10% of clips (at least one) as the held-out set.
pub fn split_dataset<T: Clone>(clips: &[T]) -> (Vec<T>, Vec<T>) {
    let held = (clips.len() / 10).max(1).min(clips.len().saturating_sub(1));
    let cut = clips.len() - held;
    (clips[..cut].to_vec(), clips[cut..].to_vec())
}
