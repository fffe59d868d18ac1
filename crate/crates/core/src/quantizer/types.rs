use crate::quantizer::QuantizerError;
use crate::scalar::Scalar;

/// Time-ordered sequence of `dim`-dimensional latent vectors, stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSequence<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> LatentSequence<T> {
    pub fn new(dim: usize, data: Vec<T>) -> Result<Self, QuantizerError> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(QuantizerError::Shape(format!("{} values do not form {dim}-dimensional frames", data.len())));
        }
        Ok(Self { dim, data })
    }

    pub fn zeros(frames: usize, dim: usize) -> Self {
        Self { dim, data: vec![T::zero(); frames * dim] }
    }

    pub fn from_frames(frames: &[Vec<T>]) -> Result<Self, QuantizerError> {
        let dim = frames.first().map(Vec::len).unwrap_or(0);
        if frames.iter().any(|f| f.len() != dim) {
            return Err(QuantizerError::Shape("frames differ in length".into()));
        }
        Self::new(dim, frames.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frames(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn frame(&self, t: usize) -> &[T] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [T] {
        &mut self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn iter_frames(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Concatenates sequences of equal dimension along time.
    pub fn concat(parts: &[LatentSequence<T>]) -> Result<Self, QuantizerError> {
        let dim = parts.first().map(|p| p.dim).ok_or_else(|| QuantizerError::Shape("no sequences".into()))?;
        if parts.iter().any(|p| p.dim != dim) {
            return Err(QuantizerError::Shape("sequences differ in dimension".into()));
        }
        Self::new(dim, parts.iter().flat_map(|p| p.data.iter().copied()).collect())
    }
}

/// Per-frame, per-layer code indices, stored frame-major (layers contiguous per frame).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeIndexGrid {
    frames: usize,
    layers: usize,
    indices: Vec<u32>,
}

impl CodeIndexGrid {
    pub fn new(frames: usize, layers: usize, indices: Vec<u32>) -> Result<Self, QuantizerError> {
        if indices.len() != frames * layers {
            return Err(QuantizerError::Shape(format!(
                "{} indices for {frames} frames x {layers} layers",
                indices.len()
            )));
        }
        Ok(Self { frames, layers, indices })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn get(&self, frame: usize, layer: usize) -> u32 {
        self.indices[frame * self.layers + layer]
    }

    pub fn frame(&self, frame: usize) -> &[u32] {
        &self.indices[frame * self.layers..(frame + 1) * self.layers]
    }

    /// All indices in frame-major order.
    pub fn as_slice(&self) -> &[u32] {
        &self.indices
    }

    /// Indices of one layer across all frames.
    pub fn layer(&self, layer: usize) -> Vec<u32> {
        (0..self.frames).map(|t| self.get(t, layer)).collect()
    }

    /// Keeps only the first `layers` layers of every frame.
    pub fn truncate_layers(&self, layers: usize) -> Self {
        let layers = layers.min(self.layers);
        let indices = (0..self.frames).flat_map(|t| self.frame(t)[..layers].iter().copied()).collect();
        Self { frames: self.frames, layers, indices }
    }
}
