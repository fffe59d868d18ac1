use crate::losses::{mel_scales, LOG_FLOOR, MEL_WINDOWS};
use crate::metrics::MetricsError;
use crate::scalar::Scalar;
use crate::signal::{mel_spectrogram, stft_samples, AudioBuffer, MelConfig, WindowKind};

/// Upper bound returned by [`si_sdr`] when the residual noise vanishes.
pub const SI_SDR_CAP_DB: f64 = 100.0;
const NOISE_FLOOR: f64 = 1e-20;
/// STFT window lengths of the spectral distance; hop is a quarter window.
pub const STFT_WINDOWS: [usize; 5] = [2048, 1024, 512, 256, 128];

fn check_len<T>(a: &[T], b: &[T]) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    Ok(())
}

/// Scale-invariant signal-to-distortion ratio in dB, capped at +100 dB.
pub fn si_sdr<T: Scalar>(reference: &AudioBuffer<T>, estimate: &AudioBuffer<T>) -> Result<f64, MetricsError> {
    check_len(&reference.samples, &estimate.samples)?;
    let x: Vec<f64> = reference.samples.iter().map(|v| v.to_f64_lossy()).collect();
    let y: Vec<f64> = estimate.samples.iter().map(|v| v.to_f64_lossy()).collect();
    let energy: f64 = x.iter().map(|v| v * v).sum();
    if energy == 0.0 {
        return Err(MetricsError::ZeroReference);
    }
    let alpha = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / energy;
    let mut target = 0.0;
    let mut noise = 0.0;
    for (&a, &b) in x.iter().zip(&y) {
        let t = alpha * a;
        target += t * t;
        noise += (b - t) * (b - t);
    }
    if noise < NOISE_FLOOR {
        return Ok(SI_SDR_CAP_DB);
    }
    Ok((10.0 * (target / noise).log10()).min(SI_SDR_CAP_DB))
}

/// Mean absolute difference of `log(1e-5 + mel)` over the mel scales that fit
/// the signal, averaged over scales.
pub fn mel_distance<T: Scalar>(x: &AudioBuffer<T>, x_hat: &AudioBuffer<T>) -> Result<f64, MetricsError> {
    check_len(&x.samples, &x_hat.samples)?;
    let scales = mel_scales(x.len());
    if scales.is_empty() {
        return Err(MetricsError::SignalTooShort { len: x.len(), min: MEL_WINDOWS[0] });
    }
    let a = x.cast::<f64>();
    let b = x_hat.cast::<f64>();
    let mut total = 0.0;
    for &w in &scales {
        let cfg = MelConfig::with_window(w, x.sample_rate);
        let ma = mel_spectrogram(&a, &cfg)?;
        let mb = mel_spectrogram(&b, &cfg)?;
        total += mean_log_diff(&ma.data, &mb.data, |m| (LOG_FLOOR + m).ln());
    }
    Ok(total / scales.len() as f64)
}

/// Mean absolute difference of `log(max(|X|, 1e-5))` over the STFT scales
/// that fit the signal, averaged over scales.
pub fn stft_distance<T: Scalar>(x: &AudioBuffer<T>, x_hat: &AudioBuffer<T>) -> Result<f64, MetricsError> {
    check_len(&x.samples, &x_hat.samples)?;
    let scales: Vec<usize> = STFT_WINDOWS.iter().copied().filter(|&w| w <= x.len()).collect();
    if scales.is_empty() {
        return Err(MetricsError::SignalTooShort { len: x.len(), min: STFT_WINDOWS[STFT_WINDOWS.len() - 1] });
    }
    let a: Vec<f64> = x.samples.iter().map(|v| v.to_f64_lossy()).collect();
    let b: Vec<f64> = x_hat.samples.iter().map(|v| v.to_f64_lossy()).collect();
    let mut total = 0.0;
    for &w in &scales {
        let sa = stft_samples(&a, w, w / 4, WindowKind::Hann)?.magnitudes();
        let sb = stft_samples(&b, w, w / 4, WindowKind::Hann)?.magnitudes();
        total += mean_log_diff(&sa, &sb, |m| m.max(LOG_FLOOR).ln());
    }
    Ok(total / scales.len() as f64)
}

fn mean_log_diff(a: &[f64], b: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    a.iter().zip(b).map(|(&p, &q)| (f(p) - f(q)).abs()).sum::<f64>() / a.len() as f64
}
