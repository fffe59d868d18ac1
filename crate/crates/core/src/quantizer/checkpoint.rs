//! Binary codebook file.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic     4 bytes  "NDVQ"
//! version   u32
//! K         u32
//! D         u32
//! n_layers  u32
//! flags     u32      bit 0 set: Euclidean codebooks
//! per layer:
//!   means       K*D f32, row-major
//!   log_sigmas  K*D f32, row-major (NDVQ only)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::quantizer::{Codebook, EuclideanCodebook, NormalCodebook, QuantizerError, ResidualQuantizer};
use crate::scalar::Scalar;

pub const CODEBOOK_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"NDVQ";
const FLAG_EUCLIDEAN: u32 = 1;

pub fn write_codebooks<T: Scalar, W: Write>(w: &mut W, rq: &ResidualQuantizer<T>) -> Result<(), QuantizerError> {
    let euclidean = rq.layers().iter().any(|l| matches!(l, Codebook::Euclidean(_)));
    w.write_all(MAGIC)?;
    for v in [
        CODEBOOK_FORMAT_VERSION,
        rq.codebook_size() as u32,
        rq.dim() as u32,
        rq.n_layers() as u32,
        if euclidean { FLAG_EUCLIDEAN } else { 0 },
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    for layer in rq.layers() {
        write_f32s(w, layer.means())?;
        if let Codebook::Normal(cb) = layer {
            write_f32s(w, cb.log_sigmas())?;
        }
    }
    Ok(())
}

pub fn read_codebooks<T: Scalar, R: Read>(r: &mut R) -> Result<ResidualQuantizer<T>, QuantizerError> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic)?;
    if &magic != MAGIC {
        return Err(QuantizerError::BadMagic(magic));
    }
    let version = read_u32(r)?;
    if version != CODEBOOK_FORMAT_VERSION {
        return Err(QuantizerError::UnsupportedVersion(version));
    }
    let size = read_u32(r)? as usize;
    let dim = read_u32(r)? as usize;
    let n_layers = read_u32(r)? as usize;
    let flags = read_u32(r)?;
    if flags & !FLAG_EUCLIDEAN != 0 {
        return Err(QuantizerError::Malformed(format!("unknown flags {flags:#x}")));
    }
    let n = size.checked_mul(dim).ok_or_else(|| QuantizerError::Malformed("K x D overflows".into()))?;
    let mut layers = Vec::with_capacity(n_layers.min(1024));
    for _ in 0..n_layers {
        let means = read_f32s(r, n)?;
        let layer = if flags & FLAG_EUCLIDEAN != 0 {
            Codebook::Euclidean(EuclideanCodebook::new(size, dim, means)?)
        } else {
            let log_sigmas = read_f32s(r, n)?;
            Codebook::Normal(NormalCodebook::new(size, dim, means, log_sigmas)?)
        };
        layers.push(layer);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(QuantizerError::Malformed("trailing bytes after the last layer".into()));
    }
    ResidualQuantizer::new(layers)
}

pub fn save_codebooks<T: Scalar>(path: impl AsRef<Path>, rq: &ResidualQuantizer<T>) -> Result<(), QuantizerError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_codebooks(&mut w, rq)?;
    w.flush()?;
    Ok(())
}

pub fn load_codebooks<T: Scalar>(path: impl AsRef<Path>) -> Result<ResidualQuantizer<T>, QuantizerError> {
    read_codebooks(&mut BufReader::new(File::open(path)?))
}

fn write_f32s<T: Scalar, W: Write>(w: &mut W, values: &[T]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 4);
    for v in values {
        buf.extend_from_slice(&v.to_f32().unwrap_or(f32::NAN).to_le_bytes());
    }
    w.write_all(&buf)
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), QuantizerError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => QuantizerError::Malformed("file is truncated".into()),
        _ => QuantizerError::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, QuantizerError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32s<T: Scalar, R: Read>(r: &mut R, n: usize) -> Result<Vec<T>, QuantizerError> {
    let mut buf = vec![0u8; n * 4];
    read_exact(r, &mut buf)?;
    Ok(buf.chunks_exact(4).map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rq(euclidean: bool) -> ResidualQuantizer<f32> {
        let layers = (0..3)
            .map(|l| {
                let means: Vec<f32> = (0..8).map(|i| (i as f32 * 0.37 + l as f32).sin()).collect();
                if euclidean {
                    Codebook::Euclidean(EuclideanCodebook::new(4, 2, means).unwrap())
                } else {
                    let ls: Vec<f32> = (0..8).map(|i| -0.1 * i as f32).collect();
                    Codebook::Normal(NormalCodebook::new(4, 2, means, ls).unwrap())
                }
            })
            .collect();
        ResidualQuantizer::new(layers).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for euclidean in [false, true] {
            let rq = sample_rq(euclidean);
            let mut bytes = Vec::new();
            write_codebooks(&mut bytes, &rq).unwrap();
            let back: ResidualQuantizer<f32> = read_codebooks(&mut bytes.as_slice()).unwrap();
            assert_eq!(back, rq);
            let per_layer = if euclidean { 8 } else { 16 };
            assert_eq!(bytes.len(), 24 + 3 * per_layer * 4);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let mut bytes = Vec::new();
        write_codebooks(&mut bytes, &sample_rq(false)).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_codebooks::<f32, _>(&mut bad.as_slice()), Err(QuantizerError::BadMagic(_))));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(read_codebooks::<f32, _>(&mut bad.as_slice()), Err(QuantizerError::UnsupportedVersion(9))));
        let short = &bytes[..bytes.len() - 1];
        assert!(matches!(read_codebooks::<f32, _>(&mut &short[..]), Err(QuantizerError::Malformed(_))));
    }
}
