//! Model weight file.
//!
//! Layout, little-endian:
//!
//! ```text
//! magic      4 bytes "NDVW"
//! version    u32
//! n_tensors  u32
//! per tensor:
//!   name_len  u16, then name_len bytes of UTF-8
//!   rows      u32
//!   cols      u32
//!   data      rows*cols f32, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::codec::{CodecConfig, CodecError, ParamTensor, ToyCodecModel};
use crate::scalar::Scalar;

pub const WEIGHTS_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"NDVW";

pub fn write_weights<T: Scalar, W: Write>(w: &mut W, model: &ToyCodecModel<T>) -> Result<(), CodecError> {
    w.write_all(MAGIC)?;
    w.write_all(&WEIGHTS_FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(model.params().len() as u32).to_le_bytes())?;
    for p in model.params() {
        let name = p.name.as_bytes();
        w.write_all(&(name.len() as u16).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&(p.rows as u32).to_le_bytes())?;
        w.write_all(&(p.cols as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(p.data.len() * 4);
        for v in &p.data {
            buf.extend_from_slice(&v.to_f32().unwrap_or(f32::NAN).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn take<R: Read>(r: &mut R, n: usize) -> Result<Vec<u8>, CodecError> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => CodecError::WeightFile("file is truncated".into()),
        _ => CodecError::Io(e),
    })?;
    Ok(buf)
}

fn u32_at<R: Read>(r: &mut R) -> Result<u32, CodecError> {
    let b = take(r, 4)?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

/// Reads a weight file and checks it against `config`.
pub fn read_weights<T: Scalar, R: Read>(r: &mut R, config: CodecConfig) -> Result<ToyCodecModel<T>, CodecError> {
    let magic = take(r, 4)?;
    if magic != MAGIC {
        return Err(CodecError::WeightFile(format!("bad magic {magic:?}")));
    }
    let version = u32_at(r)?;
    if version != WEIGHTS_FORMAT_VERSION {
        return Err(CodecError::WeightFile(format!("unsupported version {version}")));
    }
    let n = u32_at(r)? as usize;
    let mut params = Vec::with_capacity(n.min(4096));
    for _ in 0..n {
        let len = take(r, 2)?;
        let len = u16::from_le_bytes([len[0], len[1]]) as usize;
        let name = String::from_utf8(take(r, len)?)
            .map_err(|_| CodecError::WeightFile("tensor name is not UTF-8".into()))?;
        let rows = u32_at(r)? as usize;
        let cols = u32_at(r)? as usize;
        let count = rows
            .checked_mul(cols)
            .filter(|c| *c <= 1 << 28)
            .ok_or_else(|| CodecError::WeightFile(format!("tensor {name} is implausibly large")))?;
        let raw = take(r, count * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect::<Vec<T>>();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CodecError::WeightFile(format!("tensor {name} contains non-finite values")));
        }
        params.push(ParamTensor { name, rows, cols, data });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(CodecError::WeightFile("trailing bytes after the last tensor".into()));
    }
    ToyCodecModel::from_params(config, params)
}

pub fn save_weights<T: Scalar>(path: impl AsRef<Path>, model: &ToyCodecModel<T>) -> Result<(), CodecError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_weights(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_weights<T: Scalar>(path: impl AsRef<Path>, config: CodecConfig) -> Result<ToyCodecModel<T>, CodecError> {
    read_weights(&mut BufReader::new(File::open(path)?), config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let model = ToyCodecModel::<f32>::new(CodecConfig::toy(), 3).unwrap();
        let mut bytes = Vec::new();
        write_weights(&mut bytes, &model).unwrap();
        let back: ToyCodecModel<f32> = read_weights(&mut bytes.as_slice(), CodecConfig::toy()).unwrap();
        assert_eq!(back, model);
        let other = CodecConfig { latent_dim: 16, ..CodecConfig::toy() };
        let err = read_weights::<f32, _>(&mut bytes.as_slice(), other).unwrap_err();
        assert!(err.to_string().contains("enc.out.w"), "{err}");
    }
}
