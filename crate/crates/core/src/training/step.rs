use rand::seq::index::sample;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{CodecConfig, ToyCodecModel};
use crate::losses::{
    adversarial_gen_loss_graph, discriminator_hinge_loss_graph, feature_matching_loss_graph,
    generator_total, multiscale_mel_loss_graph, time_l1_graph,
};
use crate::numerics::{adam_step, AdamState, Graph, Var};
use crate::quantizer::{
    codebook_loss, fill_standard_normal, init_codebooks, quantize_traced, Codebook, CodeIndexGrid, LatentSequence, QuantizerInit,
    QuantizerKind, ResidualQuantizer, UsageHistogram,
};
use crate::scalar::Scalar;
use crate::signal::AudioBuffer;
use crate::training::{SigmaGradient, StftDiscriminator, TrainConfig, TrainError};

const DATA_STREAM: u64 = 1;
const EPS_STREAM: u64 = 2;
const INIT_STREAM: u64 = 3;
const USAGE_EMA_DECAY: f64 = 0.99;

/// Loss components of one step, averaged over the batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub time_l1: f64,
    pub mel: f64,
    pub codebook: f64,
    pub adversarial: f64,
    pub feature_matching: f64,
    /// Weighted discriminator objective; 0 when the adversarial terms are disabled.
    pub discriminator: f64,
    /// Weighted generator objective.
    pub total: f64,
}

impl LossRecord {
    pub const CSV_HEADER: &'static str = "step,time_l1,mel,codebook,adversarial,feature_matching,discriminator,total";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.step,
            self.time_l1,
            self.mel,
            self.codebook,
            self.adversarial,
            self.feature_matching,
            self.discriminator,
            self.total
        )
    }
}

/// Everything that changes during training.
#[derive(Debug, Clone)]
pub struct TrainState<T> {
    pub model: ToyCodecModel<T>,
    pub rq: ResidualQuantizer<T>,
    pub discriminator: Option<StftDiscriminator<T>>,
    /// Completed optimizer steps.
    pub step: usize,
    adam: AdamState<T>,
    disc_adam: AdamState<T>,
    data_rng: ChaCha8Rng,
    eps_rng: ChaCha8Rng,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

struct ClipOutput<T> {
    /// time, mel, codebook, adversarial, feature matching
    components: [f64; 5],
    grads: Vec<T>,
    recon: Vec<T>,
    indices: CodeIndexGrid,
    latents: LatentSequence<T>,
}

const COMPONENT_NAMES: [&str; 5] = ["time_l1", "mel", "codebook", "adversarial", "feature_matching"];

impl<T: Scalar> TrainState<T> {
    /// Fresh model from the init stream of `train.seed`, codebooks seeded from
    /// the encoded training clips.
    pub fn initialize(
        codec: &CodecConfig,
        train: &TrainConfig,
        clips: &[AudioBuffer<T>],
    ) -> Result<Self, TrainError> {
        codec.validate()?;
        train.validate()?;
        let clip_length = clips.first().map(|c| c.len()).ok_or(TrainError::EmptyDataset)?;
        check_clips(codec, clips)?;
        let mut init = stream(train.seed, INIT_STREAM);
        let model_seed = init.next_u64();
        let codebook_seed = init.next_u64();
        let disc_seed = init.next_u64();
        let mut model = ToyCodecModel::new(codec.clone(), model_seed)?;
        let latents: Vec<LatentSequence<T>> =
            clips.par_iter().map(|c| model.encode(c)).collect::<Result<_, _>>()?;
        let mut pool = LatentSequence::concat(&latents)?;
        if let Some(target) = train.latent_init_rms {
            let values = pool.as_slice();
            let ms = values.iter().map(|v| v.to_f64_lossy().powi(2)).sum::<f64>() / values.len() as f64;
            if ms > 0.0 {
                let factor = T::of(target / ms.sqrt());
                model.scale_latents(factor);
                pool.as_mut_slice().iter_mut().for_each(|v| *v = *v * factor);
            }
        }
        let spec = QuantizerInit {
            kind: train.quantizer,
            codebook_size: codec.codebook_size,
            dim: codec.latent_dim,
            layers: codec.max_layers,
        };
        let mut rq = init_codebooks(&spec, &pool, codebook_seed)?;
        rq.set_active_layers(train.n_q.unwrap_or(codec.max_layers))?;
        let discriminator =
            train.gan_enabled.then(|| StftDiscriminator::new(clip_length, train.discriminator_hidden, disc_seed));
        let n = model.n_params() + quantizer_params(&rq);
        let dn = discriminator.as_ref().map_or(0, |d| d.n_params());
        Ok(Self {
            model,
            rq,
            discriminator,
            step: 0,
            adam: AdamState::new(n),
            disc_adam: AdamState::new(dn),
            data_rng: stream(train.seed, DATA_STREAM),
            eps_rng: stream(train.seed, EPS_STREAM),
        })
    }

    /// Draws `batch_size` distinct clip indices (fewer if the set is smaller).
    pub fn next_batch(&mut self, n_clips: usize, batch_size: usize) -> Vec<usize> {
        sample(&mut self.data_rng, n_clips, batch_size.min(n_clips)).into_vec()
    }

    fn flat_params(&self) -> Vec<T> {
        let mut flat = Vec::with_capacity(self.adam.first_moment.len());
        for p in self.model.params() {
            flat.extend_from_slice(&p.data);
        }
        for layer in self.rq.layers() {
            flat.extend_from_slice(layer.means());
            if let Codebook::Normal(cb) = layer {
                flat.extend_from_slice(cb.log_sigmas());
            }
        }
        flat
    }

    fn set_flat_params(&mut self, flat: &[T]) {
        let mut off = 0;
        let mut take = |dst: &mut [T]| {
            dst.copy_from_slice(&flat[off..off + dst.len()]);
            off += dst.len();
        };
        for p in self.model.params_mut() {
            take(&mut p.data);
        }
        for i in 0..self.rq.n_layers() {
            let layer = self.rq.layer_mut(i);
            take(layer.means_mut());
            if let Codebook::Normal(cb) = layer {
                take(cb.log_sigmas_mut());
                cb.clamp_sigmas();
            }
        }
    }

    fn clip_pass(&self, cfg: &TrainConfig, x: &AudioBuffer<T>, eps_seed: u64) -> Result<ClipOutput<T>, TrainError> {
        let w = &cfg.weights;
        let mut g = Graph::new();
        let model_vars = self.model.register(&mut g, true);
        let input = g.constant(x.samples.clone(), 1, x.len());
        let z = self.model.encode_graph(&mut g, &model_vars, input);
        let shape = g.shape(z);
        let latents = LatentSequence::new(shape.cols, g.value(z).to_vec())?;

        let mut rng = ChaCha8Rng::seed_from_u64(eps_seed);
        let mut noise = |buf: &mut [T]| fill_standard_normal(&mut rng, buf);
        let trace = quantize_traced(&self.rq, &latents, Some(&mut noise))?;
        let n_q = self.rq.active_layers();
        let frames = latents.frames();

        let mut layer_vars: Vec<(Var, Option<Var>)> = Vec::with_capacity(n_q);
        let mut cb_terms = Vec::with_capacity(n_q);
        let mut samples = Vec::with_capacity(n_q);
        for i in 0..n_q {
            let layer = self.rq.layer(i);
            let (k, d) = (layer.size(), layer.dim());
            let means = g.param(layer.means().to_vec(), k, d);
            let log_sigmas = layer.as_normal().map(|cb| g.param(cb.log_sigmas().to_vec(), k, d));
            layer_vars.push((means, log_sigmas));
            let rows: Vec<usize> = trace.result.indices.layer(i).iter().map(|&v| v as usize).collect();
            let mu = g.gather_rows(means, &rows);
            let sigma = log_sigmas.map(|ls| {
                let picked = g.gather_rows(ls, &rows);
                g.exp(picked)
            });
            let residual = g.pass_through(z, trace.layer_inputs[i].as_slice().to_vec());
            cb_terms.push((residual, mu, sigma));
            if cfg.sigma_gradient == SigmaGradient::Reparameterized {
                let sample = match sigma {
                    Some(s) => {
                        let eps = g.constant(trace.epsilons[i].as_slice().to_vec(), frames, d);
                        let spread = g.mul(eps, s);
                        g.add(mu, spread)
                    }
                    None => mu,
                };
                samples.push(sample);
            }
        }
        let per_layer: Vec<Var> = cb_terms
            .iter()
            .map(|&(r, mu, sigma)| codebook_loss(&mut g, r, mu, sigma, T::of(w.beta), T::of(w.gamma)))
            .collect();
        let l_c = g.add_all(&per_layer).expect("at least one layer");

        let q = match cfg.sigma_gradient {
            SigmaGradient::Literal => g.pass_through(z, trace.result.quantized.as_slice().to_vec()),
            SigmaGradient::Reparameterized => {
                let sum = g.add_all(&samples).expect("at least one layer");
                let frozen = g.detach(z);
                let through = g.sub(z, frozen);
                g.add(sum, through)
            }
        };
        let x_hat = self.model.decode_graph(&mut g, &model_vars, q, x.len());
        let l_t = time_l1_graph(&mut g, input, x_hat)?;
        let l_f = multiscale_mel_loss_graph(&mut g, input, x_hat, x.sample_rate)?;

        let mut terms = vec![(l_t, w.lambda_t), (l_f, w.lambda_f), (l_c, w.lambda_c)];
        let (mut v_a, mut v_fm) = (0.0, 0.0);
        if let Some(disc) = &self.discriminator {
            let disc_vars = disc.register(&mut g, false);
            let fake = disc.forward(&mut g, &disc_vars, x_hat)?;
            let (_, real_features) = disc.evaluate(&x.samples)?;
            let l_a = adversarial_gen_loss_graph(&mut g, &fake.logits)?;
            let l_fm = feature_matching_loss_graph(&mut g, &real_features, &fake.features)?;
            v_a = g.scalar(l_a).to_f64_lossy();
            v_fm = g.scalar(l_fm).to_f64_lossy();
            terms.push((l_a, w.lambda_a));
            terms.push((l_fm, w.lambda_fm));
        }
        let components = [
            g.scalar(l_t).to_f64_lossy(),
            g.scalar(l_f).to_f64_lossy(),
            g.scalar(l_c).to_f64_lossy(),
            v_a,
            v_fm,
        ];
        if let Some(i) = components.iter().position(|v| !v.is_finite()) {
            return Err(TrainError::NonFiniteLoss { step: self.step, term: COMPONENT_NAMES[i] });
        }
        let weighted: Vec<Var> = terms.iter().map(|&(v, lambda)| g.scale(v, T::of(lambda))).collect();
        let total = g.add_all(&weighted).expect("non-empty");
        g.backward(total)?;

        let mut grads = Vec::with_capacity(self.adam.first_moment.len());
        for v in &model_vars.0 {
            grads.extend(g.grad(*v));
        }
        for i in 0..self.rq.n_layers() {
            let layer = self.rq.layer(i);
            let n = layer.size() * layer.dim();
            let normal = layer.as_normal().is_some();
            match layer_vars.get(i) {
                Some(&(means, log_sigmas)) => {
                    grads.extend(g.grad(means));
                    if let Some(ls) = log_sigmas {
                        grads.extend(g.grad(ls));
                    }
                }
                None => grads.extend(std::iter::repeat(T::zero()).take(if normal { 2 * n } else { n })),
            }
        }
        Ok(ClipOutput {
            components,
            grads,
            recon: g.value(x_hat).to_vec(),
            indices: trace.result.indices,
            latents,
        })
    }

    fn discriminator_pass(
        disc: &StftDiscriminator<T>,
        lambda_d: f64,
        real: &[T],
        fake: &[T],
    ) -> Result<(f64, Vec<T>), TrainError> {
        let mut g = Graph::new();
        let vars = disc.register(&mut g, true);
        let xr = g.constant(real.to_vec(), 1, real.len());
        let xf = g.constant(fake.to_vec(), 1, fake.len());
        let r = disc.forward(&mut g, &vars, xr)?;
        let f = disc.forward(&mut g, &vars, xf)?;
        let l_d = discriminator_hinge_loss_graph(&mut g, &r.logits, &f.logits)?;
        let loss = g.scale(l_d, T::of(lambda_d));
        let value = g.scalar(loss).to_f64_lossy();
        if !value.is_finite() {
            return Err(TrainError::NonFiniteLoss { step: 0, term: "discriminator" });
        }
        g.backward(loss)?;
        let grads = vars.iter().flat_map(|v| g.grad(*v)).collect();
        Ok((value, grads))
    }
}

fn quantizer_params<T: Scalar>(rq: &ResidualQuantizer<T>) -> usize {
    rq.layers()
        .iter()
        .map(|l| l.size() * l.dim() * if l.kind() == QuantizerKind::Ndvq { 2 } else { 1 })
        .sum()
}

pub(crate) fn check_clips<T: Scalar>(codec: &CodecConfig, clips: &[AudioBuffer<T>]) -> Result<(), TrainError> {
    let len = clips.first().map(|c| c.len()).ok_or(TrainError::EmptyDataset)?;
    for (i, c) in clips.iter().enumerate() {
        if c.len() != len {
            return Err(TrainError::InvalidConfig(format!("clip {i} has {} samples, expected {len}", c.len())));
        }
        if c.sample_rate != codec.sample_rate {
            return Err(TrainError::InvalidConfig(format!(
                "clip {i} is at {} Hz but the codec runs at {} Hz",
                c.sample_rate, codec.sample_rate
            )));
        }
    }
    if len < codec.stride_product() || len < crate::losses::MEL_WINDOWS[0] {
        return Err(TrainError::InvalidConfig(format!(
            "clip length {len} is shorter than the stride product {} or the smallest mel window",
            codec.stride_product()
        )));
    }
    Ok(())
}

/// Scales `grads` so that their global L2 norm is at most `max_norm`; returns the norm before clipping.
pub fn clip_grad_norm<T: Scalar>(grads: &mut [T], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g.to_f64_lossy().powi(2)).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = T::of(max_norm / norm);
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// One optimizer step on `batch`: training-mode quantization, the weighted
/// generator objective, gradient clipping, Adam and the sigma clamp; then a
/// discriminator update when the adversarial terms are enabled and warmup is over.
pub fn train_step<T: Scalar>(
    state: &mut TrainState<T>,
    batch: &[AudioBuffer<T>],
    cfg: &TrainConfig,
) -> Result<LossRecord, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    check_clips(state.model.config(), batch)?;
    let seeds: Vec<u64> = batch.iter().map(|_| state.eps_rng.next_u64()).collect();
    let st: &TrainState<T> = state;
    let outputs: Vec<Result<ClipOutput<T>, TrainError>> =
        batch.par_iter().zip(seeds).map(|(x, seed)| st.clip_pass(cfg, x, seed)).collect();
    let outputs = outputs.into_iter().collect::<Result<Vec<_>, _>>()?;

    let b = batch.len() as f64;
    let mut grads = vec![T::zero(); state.adam.first_moment.len()];
    let mut comp = [0.0; 5];
    for out in &outputs {
        for (acc, &g) in grads.iter_mut().zip(&out.grads) {
            *acc += g;
        }
        for (c, v) in comp.iter_mut().zip(out.components) {
            *c += v;
        }
    }
    let inv_b = T::of(1.0 / b);
    grads.iter_mut().for_each(|g| *g *= inv_b);
    comp.iter_mut().for_each(|c| *c /= b);
    let w = &cfg.weights;
    let total = generator_total(comp[0], comp[1], comp[3], comp[4], comp[2], w);
    if !total.is_finite() {
        return Err(TrainError::NonFiniteLoss { step: state.step, term: "total" });
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(TrainError::NonFiniteGradient { step: state.step, index: i });
    }
    clip_grad_norm(&mut grads, cfg.grad_clip_norm);
    let mut flat = state.flat_params();
    adam_step(&mut flat, &grads, &mut state.adam, T::of(cfg.learning_rate), &cfg.adam);
    state.set_flat_params(&flat);

    if let Some(threshold) = cfg.dead_code_threshold {
        replace_dead_codes(state, &outputs, threshold);
    }

    let mut disc_loss = 0.0;
    if let Some(disc) = &state.discriminator {
        let passes: Vec<Result<(f64, Vec<T>), TrainError>> = batch
            .par_iter()
            .zip(&outputs)
            .map(|(x, out)| TrainState::discriminator_pass(disc, w.lambda_d, &x.samples, &out.recon))
            .collect();
        let mut dgrads = vec![T::zero(); disc.n_params()];
        for p in passes {
            let (v, g) = p?;
            disc_loss += v / b;
            for (acc, gv) in dgrads.iter_mut().zip(g) {
                *acc += gv * inv_b;
            }
        }
        if state.step >= cfg.warmup_steps() {
            clip_grad_norm(&mut dgrads, cfg.grad_clip_norm);
            let mut flat: Vec<T> = disc.params.iter().flat_map(|p| p.data.iter().copied()).collect();
            adam_step(&mut flat, &dgrads, &mut state.disc_adam, T::of(cfg.learning_rate), &cfg.adam);
            let disc = state.discriminator.as_mut().expect("present");
            let mut off = 0;
            for p in &mut disc.params {
                let n = p.data.len();
                p.data.copy_from_slice(&flat[off..off + n]);
                off += n;
            }
        }
    }

    let record = LossRecord {
        step: state.step,
        time_l1: comp[0],
        mel: comp[1],
        codebook: comp[2],
        adversarial: comp[3],
        feature_matching: comp[4],
        discriminator: disc_loss,
        total,
    };
    state.step += 1;
    Ok(record)
}

fn replace_dead_codes<T: Scalar>(state: &mut TrainState<T>, outputs: &[ClipOutput<T>], threshold: f64) {
    let n_q = state.rq.active_layers();
    let pool: Vec<T> = outputs.iter().flat_map(|o| o.latents.as_slice().iter().copied()).collect();
    for layer in 0..n_q {
        let k = state.rq.codebook_size();
        let mut hist = UsageHistogram::new(k);
        for o in outputs {
            for idx in o.indices.layer(layer) {
                let _ = hist.record(idx as usize);
            }
        }
        if let Codebook::Euclidean(cb) = state.rq.layer_mut(layer) {
            cb.update_usage_ema(&hist, T::of(USAGE_EMA_DECAY));
            cb.replace_dead_codes(T::of(threshold), &pool, &mut state.data_rng);
        }
    }
}
