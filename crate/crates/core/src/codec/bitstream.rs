//! Compressed stream.
//!
//! Header, little-endian:
//!
//! ```text
//! magic        4 bytes "NDVC"
//! version      u16
//! sample_rate  u32
//! n_strides    u8, then one u8 per stride
//! D            u16
//! K            u16
//! n_q          u8
//! frame_count  u32
//! ```
//!
//! The payload holds `frame_count * n_q` indices of `log2 K` bits each, frame
//! by frame with the layers of a frame adjacent, packed most significant bit
//! first and zero-padded to a whole byte.

use crate::codec::{CodecConfig, CodecError};
use crate::quantizer::CodeIndexGrid;

pub const BITSTREAM_VERSION: u16 = 1;
const MAGIC: &[u8; 4] = b"NDVC";
/// Header bytes excluding the stride list.
pub const HEADER_FIXED_LEN: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitstreamHeader {
    pub sample_rate: u32,
    pub strides: Vec<u8>,
    pub latent_dim: u16,
    pub codebook_size: u16,
    pub n_q: u8,
    pub frame_count: u32,
}

impl BitstreamHeader {
    pub fn for_config(cfg: &CodecConfig, n_q: usize, frame_count: usize) -> Result<Self, CodecError> {
        cfg.validate()?;
        let invalid = |m: String| CodecError::InvalidHeader(m);
        Ok(Self {
            sample_rate: cfg.sample_rate,
            strides: cfg.strides.iter().map(|&s| s as u8).collect(),
            latent_dim: cfg.latent_dim as u16,
            codebook_size: cfg.codebook_size as u16,
            n_q: u8::try_from(n_q).map_err(|_| invalid(format!("n_q {n_q} does not fit in a byte")))?,
            frame_count: u32::try_from(frame_count)
                .map_err(|_| invalid(format!("{frame_count} frames do not fit in 32 bits")))?,
        })
    }

    pub fn bits_per_code(&self) -> u32 {
        (self.codebook_size as u32).trailing_zeros()
    }

    pub fn header_len(&self) -> usize {
        HEADER_FIXED_LEN + self.strides.len()
    }

    pub fn payload_bits(&self) -> usize {
        self.frame_count as usize * self.n_q as usize * self.bits_per_code() as usize
    }

    pub fn payload_len(&self) -> usize {
        self.payload_bits().div_ceil(8)
    }

    pub fn stride_product(&self) -> usize {
        self.strides.iter().map(|&s| s as usize).product()
    }

    fn validate(&self) -> Result<(), CodecError> {
        let invalid = |m: &str| Err(CodecError::InvalidHeader(m.into()));
        if self.codebook_size < 2 || !self.codebook_size.is_power_of_two() {
            return invalid("codebook size must be a power of two >= 2");
        }
        if self.strides.is_empty() || self.strides.contains(&0) {
            return invalid("strides must be non-empty and positive");
        }
        if self.sample_rate == 0 || self.latent_dim == 0 || self.n_q == 0 {
            return invalid("sample rate, latent dimension and n_q must be positive");
        }
        Ok(())
    }
}

pub fn pack_bitstream(header: &BitstreamHeader, grid: &CodeIndexGrid) -> Result<Vec<u8>, CodecError> {
    header.validate()?;
    if header.strides.len() > u8::MAX as usize {
        return Err(CodecError::InvalidHeader("too many strides".into()));
    }
    if grid.frames() != header.frame_count as usize || grid.layers() != header.n_q as usize {
        return Err(CodecError::InvalidHeader(format!(
            "grid is {}x{} but the header declares {}x{}",
            grid.frames(),
            grid.layers(),
            header.frame_count,
            header.n_q
        )));
    }
    let mut out = Vec::with_capacity(header.header_len() + header.payload_len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&BITSTREAM_VERSION.to_le_bytes());
    out.extend_from_slice(&header.sample_rate.to_le_bytes());
    out.push(header.strides.len() as u8);
    out.extend_from_slice(&header.strides);
    out.extend_from_slice(&header.latent_dim.to_le_bytes());
    out.extend_from_slice(&header.codebook_size.to_le_bytes());
    out.push(header.n_q);
    out.extend_from_slice(&header.frame_count.to_le_bytes());

    let bits = header.bits_per_code();
    let size = header.codebook_size as usize;
    let mut acc: u64 = 0;
    let mut filled = 0u32;
    for t in 0..grid.frames() {
        for (layer, &index) in grid.frame(t).iter().enumerate() {
            if index as usize >= size {
                return Err(CodecError::IndexOutOfRange { frame: t, layer, index, size });
            }
            acc = (acc << bits) | index as u64;
            filled += bits;
            while filled >= 8 {
                filled -= 8;
                out.push((acc >> filled) as u8);
            }
            acc &= (1u64 << filled) - 1;
        }
    }
    if filled > 0 {
        out.push((acc << (8 - filled)) as u8);
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(CodecError::Truncated { needed: end, available: self.bytes.len() });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CodecError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn unpack_bitstream(bytes: &[u8]) -> Result<(BitstreamHeader, CodeIndexGrid), CodecError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4)?;
    if magic != MAGIC {
        return Err(CodecError::BadMagic([magic[0], magic[1], magic[2], magic[3]]));
    }
    let version = cur.u16()?;
    if version != BITSTREAM_VERSION {
        return Err(CodecError::VersionMismatch { expected: BITSTREAM_VERSION, found: version });
    }
    let sample_rate = cur.u32()?;
    let n_strides = cur.u8()? as usize;
    let strides = cur.take(n_strides)?.to_vec();
    let latent_dim = cur.u16()?;
    let codebook_size = cur.u16()?;
    let n_q = cur.u8()?;
    let frame_count = cur.u32()?;
    let header = BitstreamHeader { sample_rate, strides, latent_dim, codebook_size, n_q, frame_count };
    header.validate()?;

    let payload = cur.take(header.payload_len())?;
    let trailing = bytes.len() - cur.pos;
    if trailing > 0 {
        return Err(CodecError::TrailingBytes(trailing));
    }
    let bits = header.bits_per_code();
    let count = frame_count as usize * n_q as usize;
    let mut indices = Vec::with_capacity(count);
    let mut acc: u64 = 0;
    let mut filled = 0u32;
    let mut bytes_iter = payload.iter();
    for _ in 0..count {
        while filled < bits {
            let b = *bytes_iter.next().expect("payload length checked");
            acc = (acc << 8) | b as u64;
            filled += 8;
        }
        filled -= bits;
        indices.push(((acc >> filled) & ((1u64 << bits) - 1)) as u32);
        acc &= (1u64 << filled) - 1;
    }
    let grid = CodeIndexGrid::new(frame_count as usize, n_q as usize, indices)?;
    Ok((header, grid))
}
