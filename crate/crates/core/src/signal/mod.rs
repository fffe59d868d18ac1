//! Audio buffers, WAV I/O, FFT/STFT and mel analysis.

mod audio;
pub mod fft;
pub mod mel;
pub mod stft;

pub use audio::{load_wav, read_wav, save_wav, write_wav, AudioBuffer};
pub use mel::{mel_spectrogram, MelConfig, MelFilterbank, MelSpectrogram};
pub use stft::{frame_count, stft, stft_samples, Spectrogram, StftLayout, WindowKind};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("transform length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("hop length {hop} must be in 1..={window}")]
    InvalidHop { window: usize, hop: usize },
    #[error("window of {window} samples is too long for a {signal}-sample signal")]
    WindowTooLong { window: usize, signal: usize },
    #[error("invalid mel configuration: {0}")]
    InvalidMelConfig(String),
    #[error("signal is empty")]
    EmptySignal,
    #[error("sample rate must be positive")]
    InvalidSampleRate,
    #[error("sample {0} is not finite")]
    NonFiniteSample(usize),
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("unsupported WAV encoding: {0} (expected 16-bit PCM)")]
    UnsupportedEncoding(String),
    #[error("unsupported channel count {0} (expected mono)")]
    UnsupportedChannelCount(u16),
    #[error("sample rate mismatch: expected {expected} Hz, found {found} Hz")]
    SampleRateMismatch { expected: u32, found: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
