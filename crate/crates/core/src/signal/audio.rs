use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, Write};
use std::path::Path;

use crate::scalar::Scalar;
use crate::signal::SignalError;

/// Mono audio with samples nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer<T> {
    pub samples: Vec<T>,
    pub sample_rate: u32,
}

impl<T: Scalar> AudioBuffer<T> {
    /// Wraps samples after checking they are finite and the rate is positive.
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self, SignalError> {
        if sample_rate == 0 {
            return Err(SignalError::InvalidSampleRate);
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(SignalError::NonFiniteSample(index));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn cast<U: Scalar>(&self) -> AudioBuffer<U> {
        AudioBuffer { samples: self.samples.iter().map(|s| s.cast()).collect(), sample_rate: self.sample_rate }
    }
}

/// Reads a 16-bit PCM mono WAV file, scaling samples by 1/32768.
pub fn load_wav<T: Scalar>(path: impl AsRef<Path>) -> Result<AudioBuffer<T>, SignalError> {
    let file = File::open(path)?;
    read_wav(BufReader::new(file))
}

pub fn read_wav<T: Scalar, R: Read>(reader: R) -> Result<AudioBuffer<T>, SignalError> {
    let reader = hound::WavReader::new(reader).map_err(map_hound_error)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(SignalError::UnsupportedChannelCount(spec.channels));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(SignalError::UnsupportedEncoding(format!(
            "{:?} with {} bits per sample",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let scale = 1.0 / 32768.0;
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| T::of(v as f64 * scale)))
        .collect::<Result<Vec<T>, _>>()
        .map_err(map_hound_error)?;
    AudioBuffer::new(samples, spec.sample_rate)
}

/// Writes 16-bit PCM mono; samples are clamped to `[-1, 1]` first.
pub fn save_wav<T: Scalar>(path: impl AsRef<Path>, audio: &AudioBuffer<T>) -> Result<(), SignalError> {
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    write_wav(&mut writer, audio)?;
    writer.flush()?;
    Ok(())
}

pub fn write_wav<T: Scalar, W: Write + Seek>(writer: W, audio: &AudioBuffer<T>) -> Result<(), SignalError> {
    if audio.is_empty() {
        return Err(SignalError::EmptySignal);
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut wav = hound::WavWriter::new(writer, spec).map_err(map_hound_error)?;
    for &s in &audio.samples {
        wav.write_sample(quantize_sample(s)).map_err(map_hound_error)?;
    }
    wav.finalize().map_err(map_hound_error)?;
    Ok(())
}

fn quantize_sample<T: Scalar>(s: T) -> i16 {
    let v = s.to_f64_lossy().clamp(-1.0, 1.0) * 32768.0;
    v.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

fn map_hound_error(err: hound::Error) -> SignalError {
    match err {
        // hound reports short reads as `Other`.
        hound::Error::IoError(e)
            if matches!(e.kind(), std::io::ErrorKind::UnexpectedEof | std::io::ErrorKind::Other) =>
        {
            SignalError::MalformedHeader(e.to_string())
        }
        hound::Error::IoError(e) => SignalError::Io(e),
        hound::Error::FormatError(msg) => SignalError::MalformedHeader(msg.to_string()),
        hound::Error::TooWide | hound::Error::InvalidSampleFormat | hound::Error::Unsupported => {
            SignalError::UnsupportedEncoding(err.to_string())
        }
        other => SignalError::MalformedHeader(other.to_string()),
    }
}
