//! Short-time Fourier transform with reflect padding.

use num_complex::Complex;

use crate::scalar::Scalar;
use crate::signal::fft::FftPlan;
use crate::signal::{AudioBuffer, SignalError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    /// Periodic Hann window.
    Hann,
    Rectangular,
}

pub fn window<T: Scalar>(kind: WindowKind, len: usize) -> Vec<T> {
    match kind {
        WindowKind::Rectangular => vec![T::one(); len],
        WindowKind::Hann => (0..len)
            .map(|n| {
                let phase = 2.0 * std::f64::consts::PI * n as f64 / len as f64;
                T::of(0.5 - 0.5 * phase.cos())
            })
            .collect(),
    }
}

/// Number of STFT frames for a signal: `ceil(len / hop)`.
pub fn frame_count(signal_len: usize, hop_length: usize) -> usize {
    signal_len.div_ceil(hop_length)
}

/// Framing geometry of one STFT configuration over a signal of fixed length.
///
/// Frame `t` reads `window_length` samples of the padded signal starting at
/// `t * hop_length`; the padded signal is the input with `pad_left`
/// reflected samples before it and `pad_right` after it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftLayout {
    pub signal_len: usize,
    pub window_length: usize,
    pub hop_length: usize,
    pub frames: usize,
    pub pad_left: usize,
    pub pad_right: usize,
}

impl StftLayout {
    pub fn new(signal_len: usize, window_length: usize, hop_length: usize) -> Result<Self, SignalError> {
        if window_length == 0 || !window_length.is_power_of_two() {
            return Err(SignalError::NotPowerOfTwo(window_length));
        }
        if hop_length == 0 || hop_length > window_length {
            return Err(SignalError::InvalidHop { window: window_length, hop: hop_length });
        }
        if signal_len == 0 {
            return Err(SignalError::EmptySignal);
        }
        let frames = frame_count(signal_len, hop_length);
        let pad_left = window_length / 2;
        let padded_len = (frames - 1) * hop_length + window_length;
        let pad_right = padded_len.saturating_sub(signal_len + pad_left);
        if pad_left >= signal_len || pad_right >= signal_len {
            return Err(SignalError::WindowTooLong { window: window_length, signal: signal_len });
        }
        Ok(Self { signal_len, window_length, hop_length, frames, pad_left, pad_right })
    }

    pub fn bins(&self) -> usize {
        self.window_length / 2 + 1
    }

    /// Maps an index of the padded signal back to the source sample it mirrors.
    #[inline]
    pub fn source_index(&self, padded: usize) -> usize {
        let len = self.signal_len;
        if padded < self.pad_left {
            self.pad_left - padded
        } else if padded < self.pad_left + len {
            padded - self.pad_left
        } else {
            let over = padded - self.pad_left - len;
            len - 2 - over
        }
    }
}

/// Complex spectrogram stored frame-major (`frames x bins`).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<T> {
    pub frames: usize,
    pub bins: usize,
    pub data: Vec<Complex<T>>,
}

impl<T: Scalar> Spectrogram<T> {
    pub fn frame(&self, t: usize) -> &[Complex<T>] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn magnitudes(&self) -> Vec<T> {
        self.data.iter().map(|c| c.norm()).collect()
    }
}

/// Hann-windowed STFT of an audio buffer.
pub fn stft<T: Scalar>(
    x: &AudioBuffer<T>,
    window_length: usize,
    hop_length: usize,
) -> Result<Spectrogram<T>, SignalError> {
    stft_samples(&x.samples, window_length, hop_length, WindowKind::Hann)
}

pub fn stft_samples<T: Scalar>(
    samples: &[T],
    window_length: usize,
    hop_length: usize,
    kind: WindowKind,
) -> Result<Spectrogram<T>, SignalError> {
    let layout = StftLayout::new(samples.len(), window_length, hop_length)?;
    let win = window::<T>(kind, window_length);
    Ok(stft_with_layout(samples, &layout, &win))
}

/// STFT over a precomputed layout and window. `samples.len()` must equal
/// `layout.signal_len`.
pub fn stft_with_layout<T: Scalar>(samples: &[T], layout: &StftLayout, win: &[T]) -> Spectrogram<T> {
    debug_assert_eq!(samples.len(), layout.signal_len);
    let plan = FftPlan::new(layout.window_length).expect("layout validated the window length");
    let bins = layout.bins();
    let mut data = Vec::with_capacity(layout.frames * bins);
    let mut frame = vec![T::zero(); layout.window_length];
    let mut scratch = Vec::with_capacity(layout.window_length);
    for t in 0..layout.frames {
        let start = t * layout.hop_length;
        for (n, slot) in frame.iter_mut().enumerate() {
            *slot = samples[layout.source_index(start + n)] * win[n];
        }
        data.extend(plan.forward_real(&frame, &mut scratch));
    }
    Spectrogram { frames: layout.frames, bins, data }
}
