use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{CodecConfig, CodecError};
use crate::numerics::{Graph, Var};
use crate::quantizer::LatentSequence;
use crate::scalar::Scalar;
use crate::signal::AudioBuffer;

const IO_KERNEL: usize = 7;
const LATENT_KERNEL: usize = 3;

/// A named parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor<T> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

/// Strided convolutional encoder and mirrored transposed-convolution decoder.
///
/// Encoder: conv k7 to `channels[0]`, then per stride `s` an ELU and a conv of
/// kernel `2s` and stride `s`, then ELU and conv k3 to `D`. The decoder runs
/// the same stages in reverse with transposed convolutions and trims the right
/// edge to the requested length.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyCodecModel<T> {
    config: CodecConfig,
    params: Vec<ParamTensor<T>>,
}

/// Graph nodes of every model parameter, in [`ToyCodecModel::params`] order.
#[derive(Debug, Clone)]
pub struct ModelVars(pub Vec<Var>);

/// Parameter names and shapes: `(name, rows, cols, fan_in)`.
fn layout(cfg: &CodecConfig) -> Vec<(String, usize, usize, usize)> {
    let ch = &cfg.channels;
    let d = cfg.latent_dim;
    let last = *ch.last().expect("validated");
    let mut out = Vec::new();
    let mut conv = |name: String, rows: usize, cols: usize, fan_in: usize, bias: usize| {
        out.push((format!("{name}.w"), rows, cols, fan_in));
        out.push((format!("{name}.b"), bias, 1, fan_in));
    };
    conv("enc.in".into(), ch[0], IO_KERNEL, IO_KERNEL, ch[0]);
    for (i, &s) in cfg.strides.iter().enumerate() {
        conv(format!("enc.down{i}"), ch[i + 1], ch[i] * 2 * s, ch[i] * 2 * s, ch[i + 1]);
    }
    conv("enc.out".into(), d, last * LATENT_KERNEL, last * LATENT_KERNEL, d);
    conv("dec.in".into(), last, d * LATENT_KERNEL, d * LATENT_KERNEL, last);
    for (i, &s) in cfg.strides.iter().enumerate().rev() {
        // transposed conv: each output sample sees about 2 inputs per input channel
        conv(format!("dec.up{i}"), ch[i + 1], ch[i] * 2 * s, ch[i + 1] * 2, ch[i]);
    }
    conv("dec.out".into(), 1, ch[0] * IO_KERNEL, ch[0] * IO_KERNEL, 1);
    out
}

impl<T: Scalar> ToyCodecModel<T> {
    /// Weights uniform in `+-1/sqrt(fan_in)`, biases zero.
    pub fn new(config: CodecConfig, seed: u64) -> Result<Self, CodecError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = layout(&config)
            .into_iter()
            .map(|(name, rows, cols, fan_in)| {
                let data = if name.ends_with(".b") {
                    vec![T::zero(); rows * cols]
                } else {
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    (0..rows * cols).map(|_| T::of(rng.gen_range(-bound..bound))).collect()
                };
                ParamTensor { name, rows, cols, data }
            })
            .collect();
        Ok(Self { config, params })
    }

    /// Model with every weight and bias zero.
    pub fn zeros(config: CodecConfig) -> Result<Self, CodecError> {
        config.validate()?;
        let params = layout(&config)
            .into_iter()
            .map(|(name, rows, cols, _)| ParamTensor { name, rows, cols, data: vec![T::zero(); rows * cols] })
            .collect();
        Ok(Self { config, params })
    }

    /// Builds a model from explicit tensors, checking names and shapes against the config.
    pub fn from_params(config: CodecConfig, params: Vec<ParamTensor<T>>) -> Result<Self, CodecError> {
        config.validate()?;
        let expected = layout(&config);
        if expected.len() != params.len() {
            return Err(CodecError::WeightFile(format!(
                "expected {} tensors for this configuration, found {}",
                expected.len(),
                params.len()
            )));
        }
        for ((name, rows, cols, _), p) in expected.iter().zip(&params) {
            if *name != p.name || *rows != p.rows || *cols != p.cols {
                return Err(CodecError::WeightFile(format!(
                    "tensor {} is {}x{}, expected {name} of {rows}x{cols}",
                    p.name, p.rows, p.cols
                )));
            }
            if p.data.len() != rows * cols {
                return Err(CodecError::WeightFile(format!("tensor {name} has the wrong element count")));
            }
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &CodecConfig {
        &self.config
    }

    pub fn params(&self) -> &[ParamTensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [ParamTensor<T>] {
        &mut self.params
    }

    /// Multiplies the final encoder projection (weights and bias) by `factor`,
    /// which scales every latent by the same factor.
    pub fn scale_latents(&mut self, factor: T) {
        let first = 2 * (self.config.strides.len() + 1);
        for p in &mut self.params[first..first + 2] {
            p.data.iter_mut().for_each(|v| *v = *v * factor);
        }
    }

    pub fn n_params(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ToyCodecModel<U> {
        ToyCodecModel {
            config: self.config.clone(),
            params: self
                .params
                .iter()
                .map(|p| ParamTensor {
                    name: p.name.clone(),
                    rows: p.rows,
                    cols: p.cols,
                    data: p.data.iter().map(|v| v.cast()).collect(),
                })
                .collect(),
        }
    }

    /// Adds every parameter to `g`, as trainable nodes or as constants.
    pub fn register(&self, g: &mut Graph<T>, trainable: bool) -> ModelVars {
        ModelVars(
            self.params
                .iter()
                .map(|p| {
                    if trainable {
                        g.param(p.data.clone(), p.rows, p.cols)
                    } else {
                        g.constant(p.data.clone(), p.rows, p.cols)
                    }
                })
                .collect(),
        )
    }

    fn check_input(&self, rate: u32, len: usize) -> Result<(), CodecError> {
        if rate != self.config.sample_rate {
            return Err(CodecError::SampleRateMismatch { expected: self.config.sample_rate, found: rate });
        }
        let min = self.config.stride_product();
        if len < min {
            return Err(CodecError::InputTooShort { len, min });
        }
        Ok(())
    }

    /// Encodes a `1 x len` signal node into a `frames x D` latent node.
    pub fn encode_graph(&self, g: &mut Graph<T>, vars: &ModelVars, x: Var) -> Var {
        let p = &vars.0;
        let len = g.shape(x).len();
        let mut h = g.reshape(x, 1, len);
        let mut cur = len;
        h = g.conv1d(h, p[0], p[1], 1, IO_KERNEL / 2, cur);
        let mut idx = 2;
        for &s in &self.config.strides {
            h = g.elu(h);
            cur = cur.div_ceil(s);
            h = g.conv1d(h, p[idx], p[idx + 1], s, s / 2, cur);
            idx += 2;
        }
        h = g.elu(h);
        h = g.conv1d(h, p[idx], p[idx + 1], 1, LATENT_KERNEL / 2, cur);
        g.transpose(h)
    }

    /// Decodes a `frames x D` latent node into a `1 x out_len` signal node.
    pub fn decode_graph(&self, g: &mut Graph<T>, vars: &ModelVars, z: Var, out_len: usize) -> Var {
        let p = &vars.0;
        let n_strides = self.config.strides.len();
        let mut idx = 2 * (n_strides + 2);
        let mut h = g.transpose(z);
        let mut cur = g.shape(h).cols;
        h = g.conv1d(h, p[idx], p[idx + 1], 1, LATENT_KERNEL / 2, cur);
        idx += 2;
        for &s in self.config.strides.iter().rev() {
            h = g.elu(h);
            cur *= s;
            h = g.conv_transpose1d(h, p[idx], p[idx + 1], s, s / 2, cur);
            idx += 2;
        }
        h = g.elu(h);
        h = g.conv1d(h, p[idx], p[idx + 1], 1, IO_KERNEL / 2, cur);
        if out_len < cur {
            h = g.slice_cols(h, 0, out_len);
        }
        h
    }

    pub fn encode(&self, x: &AudioBuffer<T>) -> Result<LatentSequence<T>, CodecError> {
        self.check_input(x.sample_rate, x.len())?;
        let mut g = Graph::new();
        let vars = self.register(&mut g, false);
        let input = g.constant(x.samples.clone(), 1, x.len());
        let z = self.encode_graph(&mut g, &vars, input);
        Ok(LatentSequence::new(self.config.latent_dim, g.value(z).to_vec())?)
    }

    /// Decodes latents to `frames * stride_product` samples, trimmed to `original_len` when given.
    pub fn decode(&self, z: &LatentSequence<T>, original_len: Option<usize>) -> Result<AudioBuffer<T>, CodecError> {
        if z.dim() != self.config.latent_dim {
            return Err(CodecError::DimensionMismatch { expected: self.config.latent_dim, found: z.dim() });
        }
        let full = z.frames() * self.config.stride_product();
        let out_len = original_len.map_or(full, |l| l.min(full));
        let mut g = Graph::new();
        let vars = self.register(&mut g, false);
        let zv = g.constant(z.as_slice().to_vec(), z.frames(), z.dim());
        let y = self.decode_graph(&mut g, &vars, zv, out_len);
        Ok(AudioBuffer::new(g.value(y).to_vec(), self.config.sample_rate)?)
    }
}
