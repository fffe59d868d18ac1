//! HTK-scale triangular mel filterbank and magnitude mel spectrograms.

use crate::scalar::Scalar;
use crate::signal::stft::{stft_with_layout, window, StftLayout, WindowKind};
use crate::signal::{AudioBuffer, SignalError};

pub const DEFAULT_N_MELS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MelConfig {
    pub n_mels: usize,
    pub window_length: usize,
    pub hop_length: usize,
    pub sample_rate: u32,
}

impl MelConfig {
    /// 64 bands with a hop of one eighth of the window.
    pub fn with_window(window_length: usize, sample_rate: u32) -> Self {
        Self {
            n_mels: DEFAULT_N_MELS,
            window_length,
            hop_length: (window_length / 8).max(1),
            sample_rate,
        }
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if self.n_mels == 0 || self.sample_rate == 0 {
            return Err(SignalError::InvalidMelConfig(format!("{self:?}")));
        }
        if !self.window_length.is_power_of_two() {
            return Err(SignalError::NotPowerOfTwo(self.window_length));
        }
        if self.hop_length == 0 || self.hop_length > self.window_length {
            return Err(SignalError::InvalidHop { window: self.window_length, hop: self.hop_length });
        }
        Ok(())
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Filterbank matrix stored `bins x n_mels` (row-major), so that
/// `magnitudes[frames x bins] * bank` yields `frames x n_mels`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank<T> {
    pub bins: usize,
    pub n_mels: usize,
    pub weights: Vec<T>,
    /// Triangle support `(low, center, high)` in Hz, one per band.
    pub supports: Vec<(f64, f64, f64)>,
}

impl<T: Scalar> MelFilterbank<T> {
    /// Builds triangular filters with edges equally spaced on the HTK mel scale
    /// between 0 Hz and Nyquist.
    ///
    /// Each FFT bin covers the band `[f_k - df/2, f_k + df/2]`; its weight is the
    /// mean of the triangle over that band. Narrow low-frequency filters thus
    /// keep a positive row sum even when no bin center falls inside them.
    pub fn new(n_mels: usize, window_length: usize, sample_rate: u32) -> Self {
        let bins = window_length / 2 + 1;
        let nyquist = sample_rate as f64 / 2.0;
        let mel_max = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mel_max * i as f64 / (n_mels + 1) as f64))
            .collect();
        let spacing = sample_rate as f64 / window_length as f64;
        let mut weights = vec![T::zero(); bins * n_mels];
        let mut supports = Vec::with_capacity(n_mels);
        for m in 0..n_mels {
            let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            supports.push((lo, center, hi));
            for k in 0..bins {
                let cell_lo = (k as f64 - 0.5) * spacing;
                let cell_hi = (k as f64 + 0.5) * spacing;
                let area = triangle_integral(lo, center, hi, cell_lo, cell_hi);
                weights[k * n_mels + m] = T::of(area / spacing);
            }
        }
        Self { bins, n_mels, weights, supports }
    }

    pub fn weight(&self, bin: usize, band: usize) -> T {
        self.weights[bin * self.n_mels + band]
    }

    /// Applies the bank to a `frames x bins` magnitude matrix.
    pub fn apply(&self, magnitudes: &[T], frames: usize) -> Vec<T> {
        assert_eq!(magnitudes.len(), frames * self.bins);
        let mut out = vec![T::zero(); frames * self.n_mels];
        for t in 0..frames {
            let row = &magnitudes[t * self.bins..(t + 1) * self.bins];
            let dst = &mut out[t * self.n_mels..(t + 1) * self.n_mels];
            for (k, &mag) in row.iter().enumerate() {
                if mag == T::zero() {
                    continue;
                }
                let w = &self.weights[k * self.n_mels..(k + 1) * self.n_mels];
                for (d, &wk) in dst.iter_mut().zip(w) {
                    *d += mag * wk;
                }
            }
        }
        out
    }
}

/// Integral over `[a, b]` of the unit-peak triangle with feet `lo`, `hi` and apex `center`.
fn triangle_integral(lo: f64, center: f64, hi: f64, a: f64, b: f64) -> f64 {
    let rising = |f: f64| (f - lo) / (center - lo);
    let falling = |f: f64| (hi - f) / (hi - center);
    segment_integral(&rising, lo, center, a, b) + segment_integral(&falling, center, hi, a, b)
}

fn segment_integral(f: &dyn Fn(f64) -> f64, s0: f64, s1: f64, a: f64, b: f64) -> f64 {
    let lo = s0.max(a);
    let hi = s1.min(b);
    if hi <= lo || s1 <= s0 {
        return 0.0;
    }
    0.5 * (f(lo) + f(hi)) * (hi - lo)
}

/// Magnitude mel spectrogram, `frames x n_mels`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram<T> {
    pub frames: usize,
    pub n_mels: usize,
    pub data: Vec<T>,
}

pub fn mel_spectrogram<T: Scalar>(x: &AudioBuffer<T>, cfg: &MelConfig) -> Result<MelSpectrogram<T>, SignalError> {
    cfg.validate()?;
    let layout = StftLayout::new(x.len(), cfg.window_length, cfg.hop_length)?;
    let win = window::<T>(WindowKind::Hann, cfg.window_length);
    let spec = stft_with_layout(&x.samples, &layout, &win);
    let bank = MelFilterbank::<T>::new(cfg.n_mels, cfg.window_length, cfg.sample_rate);
    let data = bank.apply(&spec.magnitudes(), spec.frames);
    Ok(MelSpectrogram { frames: spec.frames, n_mels: cfg.n_mels, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn filter_rows_positive_and_local() {
        for &win in &[32usize, 64, 128, 256, 512, 1024, 2048] {
            let bank = MelFilterbank::<f64>::new(64, win, 8000);
            let spacing = 8000.0 / win as f64;
            for m in 0..64 {
                let (lo, _, hi) = bank.supports[m];
                let mut sum = 0.0;
                for k in 0..bank.bins {
                    let w = bank.weight(k, m);
                    assert!(w >= 0.0);
                    let cell_lo = (k as f64 - 0.5) * spacing;
                    let cell_hi = (k as f64 + 0.5) * spacing;
                    if cell_hi <= lo || cell_lo >= hi {
                        assert_eq!(w, 0.0, "win {win} band {m} bin {k}");
                    }
                    sum += w;
                }
                assert!(sum > 0.0, "win {win} band {m}");
            }
        }
    }

    #[test]
    fn htk_scale_round_trip() {
        for hz in [0.0, 100.0, 700.0, 4000.0, 12000.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        assert!((hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn zero_input_zero_mel() {
        let x = AudioBuffer::new(vec![0.0f64; 1024], 8000).unwrap();
        let mel = mel_spectrogram(&x, &MelConfig::with_window(256, 8000)).unwrap();
        assert_eq!(mel.n_mels, 64);
        assert!(mel.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn white_noise_fills_every_band() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..4096).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let x = AudioBuffer::new(x, 8000).unwrap();
        for &win in &[32usize, 256, 2048] {
            let mel = mel_spectrogram(&x, &MelConfig::with_window(win, 8000)).unwrap();
            for band in 0..64 {
                let total: f64 = (0..mel.frames).map(|t| mel.data[t * 64 + band]).sum();
                assert!(total > 0.0, "win {win} band {band}");
            }
        }
    }

    #[test]
    fn doubling_amplitude_doubles_mel() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..1024).map(|_| rng.gen_range(-0.4..0.4)).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let cfg = MelConfig::with_window(128, 8000);
        let a = mel_spectrogram(&AudioBuffer::new(x, 8000).unwrap(), &cfg).unwrap();
        let b = mel_spectrogram(&AudioBuffer::new(y, 8000).unwrap(), &cfg).unwrap();
        for (u, v) in a.data.iter().zip(&b.data) {
            assert!((2.0 * u - v).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }

    #[test]
    fn window_longer_than_signal_is_rejected() {
        let x = AudioBuffer::new(vec![0.1f64; 100], 8000).unwrap();
        assert!(matches!(
            mel_spectrogram(&x, &MelConfig::with_window(512, 8000)),
            Err(SignalError::WindowTooLong { .. })
        ));
    }
}
