//! Residual stacks of codebooks: training-mode sampling, mean-only inference,
//! decoding of index grids and data-driven initialization.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::quantizer::euclidean::nearest_row;
use crate::quantizer::normal::PreparedNormal;
use crate::quantizer::{CodeIndexGrid, EuclideanCodebook, LatentSequence, NormalCodebook, QuantizerError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantizerKind {
    /// Codes are normal distributions selected by log-density.
    Ndvq,
    /// Codes are points selected by nearest neighbour.
    Euclidean,
}

impl std::fmt::Display for QuantizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QuantizerKind::Ndvq => "ndvq",
            QuantizerKind::Euclidean => "euclidean",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Codebook<T> {
    Normal(NormalCodebook<T>),
    Euclidean(EuclideanCodebook<T>),
}

impl<T: Scalar> Codebook<T> {
    pub fn kind(&self) -> QuantizerKind {
        match self {
            Codebook::Normal(_) => QuantizerKind::Ndvq,
            Codebook::Euclidean(_) => QuantizerKind::Euclidean,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Codebook::Normal(cb) => cb.size(),
            Codebook::Euclidean(cb) => cb.size(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Codebook::Normal(cb) => cb.dim(),
            Codebook::Euclidean(cb) => cb.dim(),
        }
    }

    /// Code centers: NDVQ means or Euclidean embeddings.
    pub fn means(&self) -> &[T] {
        match self {
            Codebook::Normal(cb) => cb.means(),
            Codebook::Euclidean(cb) => cb.embeddings(),
        }
    }

    pub fn means_mut(&mut self) -> &mut [T] {
        match self {
            Codebook::Normal(cb) => cb.means_mut(),
            Codebook::Euclidean(cb) => cb.embeddings_mut(),
        }
    }

    pub fn mean(&self, k: usize) -> &[T] {
        let d = self.dim();
        &self.means()[k * d..(k + 1) * d]
    }

    pub fn as_normal(&self) -> Option<&NormalCodebook<T>> {
        match self {
            Codebook::Normal(cb) => Some(cb),
            Codebook::Euclidean(_) => None,
        }
    }

    pub fn as_normal_mut(&mut self) -> Option<&mut NormalCodebook<T>> {
        match self {
            Codebook::Normal(cb) => Some(cb),
            Codebook::Euclidean(_) => None,
        }
    }

    fn selector(&self) -> Selector<'_, T> {
        match self {
            Codebook::Normal(cb) => Selector::Normal(cb.prepare()),
            Codebook::Euclidean(cb) => Selector::Euclidean(cb),
        }
    }
}

enum Selector<'a, T> {
    Normal(PreparedNormal<'a, T>),
    Euclidean(&'a EuclideanCodebook<T>),
}

impl<T: Scalar> Selector<'_, T> {
    fn select(&self, z: &[T]) -> usize {
        match self {
            Selector::Normal(p) => p.select(z),
            Selector::Euclidean(cb) => nearest_row(z, cb.embeddings(), cb.dim()),
        }
    }
}

/// An ordered stack of codebooks applied to successive residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualQuantizer<T> {
    layers: Vec<Codebook<T>>,
    active_layers: usize,
}

impl<T: Scalar> ResidualQuantizer<T> {
    /// All layers must share `K` and `D`; every layer starts active.
    pub fn new(layers: Vec<Codebook<T>>) -> Result<Self, QuantizerError> {
        let first = layers.first().ok_or_else(|| QuantizerError::Shape("a quantizer needs at least one layer".into()))?;
        let (size, dim) = (first.size(), first.dim());
        if layers.iter().any(|l| l.size() != size || l.dim() != dim) {
            return Err(QuantizerError::Shape("layers differ in codebook size or dimension".into()));
        }
        let active_layers = layers.len();
        Ok(Self { layers, active_layers })
    }

    pub fn kind(&self) -> QuantizerKind {
        self.layers[0].kind()
    }

    pub fn codebook_size(&self) -> usize {
        self.layers[0].size()
    }

    pub fn dim(&self) -> usize {
        self.layers[0].dim()
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn active_layers(&self) -> usize {
        self.active_layers
    }

    pub fn set_active_layers(&mut self, n_q: usize) -> Result<(), QuantizerError> {
        if n_q == 0 || n_q > self.layers.len() {
            return Err(QuantizerError::ActiveLayers { requested: n_q, available: self.layers.len() });
        }
        self.active_layers = n_q;
        Ok(())
    }

    pub fn layers(&self) -> &[Codebook<T>] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &Codebook<T> {
        &self.layers[i]
    }

    pub fn layer_mut(&mut self, i: usize) -> &mut Codebook<T> {
        &mut self.layers[i]
    }
}

/// Output of residual quantization.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationResult<T> {
    /// Sum of the per-layer outputs.
    pub quantized: LatentSequence<T>,
    pub indices: CodeIndexGrid,
    /// What remains of the input after the last active layer.
    pub final_residual: LatentSequence<T>,
}

/// Quantization result plus the per-layer inputs and noise draws.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationTrace<T> {
    pub result: QuantizationResult<T>,
    /// Residual entering each active layer.
    pub layer_inputs: Vec<LatentSequence<T>>,
    /// Standard-normal draws per layer (zeros in mean-only mode and for Euclidean layers).
    pub epsilons: Vec<LatentSequence<T>>,
}

/// Runs the residual loop. `noise`, when present, fills one fresh epsilon
/// vector per frame per NDVQ layer, frames outermost.
pub fn quantize_traced<T: Scalar>(
    rq: &ResidualQuantizer<T>,
    z: &LatentSequence<T>,
    mut noise: Option<&mut dyn FnMut(&mut [T])>,
) -> Result<QuantizationTrace<T>, QuantizerError> {
    let dim = rq.dim();
    if z.dim() != dim {
        return Err(QuantizerError::DimensionMismatch { expected: dim, found: z.dim() });
    }
    if !z.is_finite() {
        return Err(QuantizerError::NonFinite);
    }
    let n_q = rq.active_layers;
    let frames = z.frames();
    let selectors: Vec<Selector<'_, T>> = rq.layers[..n_q].iter().map(Codebook::selector).collect();
    let mut quantized = LatentSequence::zeros(frames, dim);
    let mut residual = z.clone();
    let mut indices = Vec::with_capacity(frames * n_q);
    let mut layer_inputs = vec![LatentSequence::zeros(frames, dim); n_q];
    let mut epsilons = vec![LatentSequence::zeros(frames, dim); n_q];
    let mut eps = vec![T::zero(); dim];
    let mut out = vec![T::zero(); dim];
    for t in 0..frames {
        for (i, selector) in selectors.iter().enumerate() {
            let r = residual.frame(t);
            layer_inputs[i].frame_mut(t).copy_from_slice(r);
            let k = selector.select(r);
            indices.push(k as u32);
            match (selector, noise.as_mut()) {
                (Selector::Normal(p), Some(draw)) => {
                    draw(&mut eps);
                    for (((o, &m), &s), &e) in out.iter_mut().zip(p.mean(k)).zip(p.sigma(k)).zip(&eps) {
                        *o = m + e * s;
                    }
                    epsilons[i].frame_mut(t).copy_from_slice(&eps);
                }
                _ => out.copy_from_slice(rq.layers[i].mean(k)),
            }
            for (q, &o) in quantized.frame_mut(t).iter_mut().zip(&out) {
                *q += o;
            }
            for (r, &o) in residual.frame_mut(t).iter_mut().zip(&out) {
                *r -= o;
            }
        }
    }
    let indices = CodeIndexGrid::new(frames, n_q, indices)?;
    Ok(QuantizationTrace {
        result: QuantizationResult { quantized, indices, final_residual: residual },
        layer_inputs,
        epsilons,
    })
}

/// Training-mode quantization: select by density, then sample `mu + eps * sigma`.
pub fn quantize_train<T: Scalar, R: Rng>(
    rq: &ResidualQuantizer<T>,
    z: &LatentSequence<T>,
    rng: &mut R,
) -> Result<QuantizationResult<T>, QuantizerError> {
    quantize_train_with_noise(rq, z, |buf| fill_standard_normal(rng, buf))
}

/// Training-mode quantization with caller-supplied epsilon draws.
pub fn quantize_train_with_noise<T: Scalar>(
    rq: &ResidualQuantizer<T>,
    z: &LatentSequence<T>,
    mut noise: impl FnMut(&mut [T]),
) -> Result<QuantizationResult<T>, QuantizerError> {
    Ok(quantize_traced(rq, z, Some(&mut noise))?.result)
}

/// Inference-mode quantization: the selected mean is the layer output.
pub fn quantize_infer<T: Scalar>(
    rq: &ResidualQuantizer<T>,
    z: &LatentSequence<T>,
) -> Result<QuantizationResult<T>, QuantizerError> {
    Ok(quantize_traced(rq, z, None)?.result)
}

pub fn fill_standard_normal<T: Scalar, R: Rng>(rng: &mut R, buf: &mut [T]) {
    for v in buf {
        let e: f64 = rng.sample(StandardNormal);
        *v = T::of(e);
    }
}

/// Sums the selected means of every layer present in `indices`.
pub fn decode_indices<T: Scalar>(
    rq: &ResidualQuantizer<T>,
    indices: &CodeIndexGrid,
) -> Result<LatentSequence<T>, QuantizerError> {
    if indices.layers() > rq.n_layers() {
        return Err(QuantizerError::ActiveLayers { requested: indices.layers(), available: rq.n_layers() });
    }
    let dim = rq.dim();
    let size = rq.codebook_size();
    let mut out = LatentSequence::zeros(indices.frames(), dim);
    for t in 0..indices.frames() {
        for (layer, &k) in indices.frame(t).iter().enumerate() {
            let k = k as usize;
            if k >= size {
                return Err(QuantizerError::DecodeIndex { frame: t, layer, index: k, size });
            }
            for (o, &m) in out.frame_mut(t).iter_mut().zip(rq.layers[layer].mean(k)) {
                *o += m;
            }
        }
    }
    Ok(out)
}

/// Shape and kind of a quantizer to initialize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantizerInit {
    pub kind: QuantizerKind,
    pub codebook_size: usize,
    pub dim: usize,
    pub layers: usize,
}

/// Seeds every layer with `K` distinct frames sampled without replacement.
///
/// Layer 1 samples the latents themselves; layer `i` samples the residuals left
/// after mean-only quantization through layers `1..i`. All sigmas start at 1.
pub fn init_codebooks<T: Scalar>(
    init: &QuantizerInit,
    samples: &LatentSequence<T>,
    seed: u64,
) -> Result<ResidualQuantizer<T>, QuantizerError> {
    let QuantizerInit { kind, codebook_size: k, dim, layers } = *init;
    if samples.dim() != dim {
        return Err(QuantizerError::DimensionMismatch { expected: dim, found: samples.dim() });
    }
    if samples.frames() < k {
        return Err(QuantizerError::NotEnoughSamples { needed: k, available: samples.frames() });
    }
    if layers == 0 {
        return Err(QuantizerError::Shape("a quantizer needs at least one layer".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut residual = samples.clone();
    let mut codebooks = Vec::with_capacity(layers);
    for _ in 0..layers {
        let picks = sample(&mut rng, residual.frames(), k);
        let mut means = Vec::with_capacity(k * dim);
        for idx in picks.iter() {
            means.extend_from_slice(residual.frame(idx));
        }
        let codebook = match kind {
            QuantizerKind::Ndvq => Codebook::Normal(NormalCodebook::with_unit_sigma(k, dim, means)?),
            QuantizerKind::Euclidean => Codebook::Euclidean(EuclideanCodebook::new(k, dim, means)?),
        };
        let single = ResidualQuantizer::new(vec![codebook.clone()])?;
        residual = quantize_infer(&single, &residual)?.final_residual;
        codebooks.push(codebook);
    }
    ResidualQuantizer::new(codebooks)
}
