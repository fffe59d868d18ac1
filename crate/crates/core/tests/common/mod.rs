#![allow(dead_code)]

use ndvq_core::codec::{CodecConfig, ModelVars, ToyCodecModel};
use ndvq_core::losses::{mel_scales, multiscale_mel_loss_graph, time_l1_graph, LOG_FLOOR};
use ndvq_core::signal::{mel_spectrogram, AudioBuffer, MelConfig};
use ndvq_core::numerics::{grad_check, Graph, NumericsError, Var};
use ndvq_core::quantizer::{codebook_loss, quantize_infer, select_code, LatentSequence, NormalCodebook, ResidualQuantizer};
use ndvq_core::quantizer::{Codebook, QuantizerInit, QuantizerKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-3;
pub const SAMPLE_RATE: u32 = 8000;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn loss_err(e: ndvq_core::losses::LossError) -> NumericsError {
    match e {
        ndvq_core::losses::LossError::Numerics(n) => n,
        other => panic!("unexpected loss error: {other}"),
    }
}

pub fn check_time_l1(seed: u64) -> f64 {
    let mut r = rng(seed);
    let x = uniform(&mut r, 48, -1.0, 1.0);
    let x_hat = uniform(&mut r, 48, -1.0, 1.0);
    let n = x.len();
    let report = grad_check(
        |g, v| {
            let a = g.constant(x.clone(), 1, n);
            time_l1_graph(g, a, v).map_err(loss_err)
        },
        &x_hat,
        FD_STEP,
    )
    .unwrap();
    report.max_relative_error
}

pub fn check_mel(seed: u64) -> f64 {
    let mut r = rng(seed);
    let x = uniform(&mut r, 64, -0.9, 0.9);
    let x_hat = uniform(&mut r, 64, -0.9, 0.9);
    let report = grad_check(
        |g, v| {
            let a = g.constant(x.clone(), 1, 64);
            multiscale_mel_loss_graph(g, a, v, SAMPLE_RATE).map_err(loss_err)
        },
        &x_hat,
        FD_STEP,
    )
    .unwrap();
    report.max_relative_error
}

/// Checks each input of the codebook loss against the finite difference of the
/// single term that is supposed to reach it: term 1 for z, term 2 for mu, term 3 for sigma.
pub fn check_codebook_partition(seed: u64) -> f64 {
    let (rows, dim) = (3, 4);
    let n = rows * dim;
    let (beta, gamma) = (0.25, 1e-5);
    let mut r = rng(seed);
    let z = uniform(&mut r, n, -2.0, 2.0);
    let mu = uniform(&mut r, n, -2.0, 2.0);
    let sigma = uniform(&mut r, n, 0.1, 3.0);

    let mut g = Graph::new();
    let zv = g.param(z.clone(), rows, dim);
    let mv = g.param(mu.clone(), rows, dim);
    let sv = g.param(sigma.clone(), rows, dim);
    let loss = codebook_loss(&mut g, zv, mv, Some(sv), beta, gamma);
    g.backward(loss).unwrap();
    let analytic = [g.grad(zv), g.grad(mv), g.grad(sv)];

    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / rows as f64;
    let norm = |a: &[f64]| a.iter().map(|x| x * x).sum::<f64>() / rows as f64;
    let terms: [Box<dyn Fn(&[f64]) -> f64>; 3] = [
        Box::new(|zz| dist(&mu, zz)),
        Box::new(|mm| beta * dist(mm, &z)),
        Box::new(|ss| gamma * norm(ss)),
    ];
    let points = [&z, &mu, &sigma];
    let mut worst: f64 = 0.0;
    for ((term, point), grad) in terms.iter().zip(points).zip(&analytic) {
        for i in 0..n {
            let mut p = point.clone();
            p[i] += FD_STEP;
            let fp = term(&p);
            p[i] -= 2.0 * FD_STEP;
            let fm = term(&p);
            let numeric = (fp - fm) / (2.0 * FD_STEP);
            worst = worst.max((grad[i] - numeric).abs() / grad[i].abs().max(1.0));
        }
    }
    worst
}

pub fn tiny_codec() -> CodecConfig {
    CodecConfig {
        sample_rate: SAMPLE_RATE,
        strides: vec![2, 2, 2],
        latent_dim: 3,
        channels: vec![2, 2, 3, 3],
        codebook_size: 4,
        max_layers: 2,
    }
}

/// Model variables where the parameters in `range` come from slices of `flat`.
fn vars_with(g: &mut Graph<f64>, model: &ToyCodecModel<f64>, flat: Var, range: std::ops::Range<usize>) -> ModelVars {
    let mut offset = 0;
    let mut out = Vec::new();
    for (i, p) in model.params().iter().enumerate() {
        if range.contains(&i) {
            let len = p.rows * p.cols;
            let s = g.slice_cols(flat, offset, len);
            out.push(g.reshape(s, p.rows, p.cols));
            offset += len;
        } else {
            out.push(g.constant(p.data.clone(), p.rows, p.cols));
        }
    }
    ModelVars(out)
}

fn flat_params(model: &ToyCodecModel<f64>, range: std::ops::Range<usize>) -> Vec<f64> {
    model.params()[range].iter().flat_map(|p| p.data.iter().copied()).collect()
}

fn recon_loss(g: &mut Graph<f64>, x: Var, x_hat: Var) -> Result<Var, NumericsError> {
    let t = time_l1_graph(g, x, x_hat).map_err(loss_err)?;
    let f = multiscale_mel_loss_graph(g, x, x_hat, SAMPLE_RATE).map_err(loss_err)?;
    let t = g.scale(t, 0.5);
    let f = g.scale(f, 0.5);
    Ok(g.add(t, f))
}

fn log_mel_margin(a: &AudioBuffer<f64>, b: &AudioBuffer<f64>) -> f64 {
    let mut margin = f64::INFINITY;
    for w in mel_scales(a.len()) {
        let cfg = MelConfig::with_window(w, SAMPLE_RATE);
        let ma = mel_spectrogram(a, &cfg).unwrap();
        let mb = mel_spectrogram(b, &cfg).unwrap();
        for (u, v) in ma.data.iter().zip(&mb.data) {
            margin = margin.min(((LOG_FLOOR + u).ln() - (LOG_FLOOR + v).ln()).abs());
        }
    }
    margin
}

pub struct PipelineCase {
    pub model: ToyCodecModel<f64>,
    pub rq: ResidualQuantizer<f64>,
    pub signal: Vec<f64>,
    pub offset: Vec<f64>,
}

impl PipelineCase {
    fn loss(&self, g: &mut Graph<f64>, x: Var, y: Var) -> Result<Var, NumericsError> {
        let c = g.constant(self.offset.clone(), 1, self.offset.len());
        let y = g.add(y, c);
        recon_loss(g, x, y)
    }
}

pub fn pipeline_case(seed: u64) -> PipelineCase {
    let cfg = tiny_codec();
    let model = ToyCodecModel::<f64>::new(cfg.clone(), seed).unwrap();
    let mut r = rng(seed ^ 0x5eed);
    let signal = uniform(&mut r, 64, -0.8, 0.8);
    // The untrained decoder output is tiny and smooth, which sits on the log-mel
    // floor. The losses see it shifted by a broadband constant that keeps every
    // sample difference at least 1 from zero; offsets are redrawn until no
    // log-mel difference is close to the |.| kink either.
    let x = AudioBuffer::new(signal.clone(), SAMPLE_RATE).unwrap();
    let latents = model.encode(&x).unwrap();
    let y = model.decode(&latents, Some(signal.len())).unwrap();
    let offset = loop {
        let offset: Vec<f64> = signal
            .iter()
            .map(|&s| {
                let m = r.gen_range(1.0..2.0);
                if r.gen_bool(0.5) { s - m } else { s + m }
            })
            .collect();
        let shifted: Vec<f64> = y.samples.iter().zip(&offset).map(|(a, b)| a + b).collect();
        let shifted = AudioBuffer::new(shifted, SAMPLE_RATE).unwrap();
        if log_mel_margin(&x, &shifted) > 2e-3 {
            break offset;
        }
    };
    let init = QuantizerInit { kind: QuantizerKind::Ndvq, codebook_size: 4, dim: cfg.latent_dim, layers: 2 };
    let rq = ndvq_core::quantizer::init_codebooks(&init, &latents, seed).unwrap();
    PipelineCase { model, rq, signal, offset }
}

/// Finite differences over every decoder parameter with the quantized latents fixed.
pub fn check_decoder_params(seed: u64) -> f64 {
    let case = pipeline_case(seed);
    let n_enc = 2 * (case.model.config().strides.len() + 2);
    let range = n_enc..case.model.params().len();
    let point = flat_params(&case.model, range.clone());
    let z = case.model.encode(&AudioBuffer::new(case.signal.clone(), SAMPLE_RATE).unwrap()).unwrap();
    let q = quantize_infer(&case.rq, &z).unwrap().quantized;
    grad_check(
        |g, flat| {
            let vars = vars_with(g, &case.model, flat, range.clone());
            let x = g.constant(case.signal.clone(), 1, case.signal.len());
            let qv = g.constant(q.as_slice().to_vec(), q.frames(), q.dim());
            let y = case.model.decode_graph(g, &vars, qv, case.signal.len());
            case.loss(g, x, y)
        },
        &point,
        FD_STEP,
    )
    .unwrap()
    .max_relative_error
}

/// Finite differences over every encoder parameter through the unquantized
/// path, where the straight-through output equals its input.
pub fn check_encoder_params(seed: u64) -> f64 {
    let case = pipeline_case(seed);
    let n_enc = 2 * (case.model.config().strides.len() + 2);
    let range = 0..n_enc;
    let point = flat_params(&case.model, range.clone());
    grad_check(
        |g, flat| {
            let vars = vars_with(g, &case.model, flat, range.clone());
            let x = g.constant(case.signal.clone(), 1, case.signal.len());
            let z = case.model.encode_graph(g, &vars, x);
            let zv = g.value(z).to_vec();
            let q = g.pass_through(z, zv);
            let y = case.model.decode_graph(g, &vars, q, case.signal.len());
            case.loss(g, x, y)
        },
        &point,
        FD_STEP,
    )
    .unwrap()
    .max_relative_error
}

/// Finite differences of the reconstruction loss with respect to the quantized latents.
pub fn check_quantized_input(seed: u64) -> f64 {
    let case = pipeline_case(seed);
    let z = case.model.encode(&AudioBuffer::new(case.signal.clone(), SAMPLE_RATE).unwrap()).unwrap();
    let q = quantize_infer(&case.rq, &z).unwrap().quantized;
    let (frames, dim) = (q.frames(), q.dim());
    grad_check(
        |g, flat| {
            let vars = case.model.register(g, false);
            let x = g.constant(case.signal.clone(), 1, case.signal.len());
            let qv = g.reshape(flat, frames, dim);
            let y = case.model.decode_graph(g, &vars, qv, case.signal.len());
            case.loss(g, x, y)
        },
        q.as_slice(),
        FD_STEP,
    )
    .unwrap()
    .max_relative_error
}

/// Straight-through contract on the full pipeline: the adjoint reaching the
/// encoder output equals the adjoint of the quantized latents, and codebook
/// means get nothing from the reconstruction loss. Returns the largest
/// adjoint mismatch and the largest mean adjoint.
pub fn straight_through_contract(seed: u64) -> (f64, f64) {
    let case = pipeline_case(seed);
    let n = case.signal.len();

    let mut g = Graph::new();
    let vars = case.model.register(&mut g, true);
    let x = g.constant(case.signal.clone(), 1, n);
    let z = case.model.encode_graph(&mut g, &vars, x);
    let latents = LatentSequence::new(case.rq.dim(), g.value(z).to_vec()).unwrap();
    let result = quantize_infer(&case.rq, &latents).unwrap();
    let mut mean_vars = Vec::new();
    for i in 0..case.rq.active_layers() {
        let layer = case.rq.layer(i);
        let means = g.param(layer.means().to_vec(), layer.size(), layer.dim());
        let rows: Vec<usize> = result.indices.layer(i).iter().map(|&k| k as usize).collect();
        g.gather_rows(means, &rows);
        mean_vars.push(means);
    }
    let q = g.pass_through(z, result.quantized.as_slice().to_vec());
    let y = case.model.decode_graph(&mut g, &vars, q, n);
    let loss = case.loss(&mut g, x, y).unwrap();
    g.backward(loss).unwrap();
    let dz = g.grad(z);

    let mut h = Graph::new();
    let vars_h = case.model.register(&mut h, true);
    let xh = h.constant(case.signal.clone(), 1, n);
    let qh = h.param(result.quantized.as_slice().to_vec(), result.quantized.frames(), result.quantized.dim());
    let yh = case.model.decode_graph(&mut h, &vars_h, qh, n);
    let loss_h = case.loss(&mut h, xh, yh).unwrap();
    h.backward(loss_h).unwrap();
    let dq = h.grad(qh);

    let mismatch = dz.iter().zip(&dq).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mean_adjoint = mean_vars.iter().flat_map(|&m| g.grad(m)).map(f64::abs).fold(0.0, f64::max);
    (mismatch, mean_adjoint)
}

/// Plain squared-distance scan, lowest index on ties.
pub fn brute_force_nearest(z: &[f64], means: &[f64], dim: usize) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (k, m) in means.chunks(dim).enumerate() {
        let d: f64 = z.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

/// Random constant-sigma instances; returns (agreements, total).
pub fn selection_oracle(instances: usize, seed: u64) -> (usize, usize) {
    let mut r = rng(seed);
    let mut agree = 0;
    for _ in 0..instances {
        let dim = r.gen_range(1..=16);
        let k = r.gen_range(2..=64);
        let means = uniform(&mut r, k * dim, -3.0, 3.0);
        let z = uniform(&mut r, dim, -3.0, 3.0);
        let sigma: f64 = r.gen_range(0.01..10.0);
        let cb = NormalCodebook::new(k, dim, means.clone(), vec![sigma.ln(); k * dim]).unwrap();
        if select_code(&z, &cb) == brute_force_nearest(&z, &means, dim) {
            agree += 1;
        }
    }
    (agree, instances)
}

/// Largest |quantized + final_residual - z| over random quantizers in both modes.
pub fn telescoping_error(instances: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let dim = r.gen_range(1..=8);
        let k = r.gen_range(1..=16);
        let layers = r.gen_range(1..=6);
        let frames = r.gen_range(1..=10);
        let cbs = (0..layers)
            .map(|_| {
                let means = uniform(&mut r, k * dim, -2.0, 2.0);
                let log_sigmas = uniform(&mut r, k * dim, -3.0, 1.0);
                Codebook::Normal(NormalCodebook::new(k, dim, means, log_sigmas).unwrap())
            })
            .collect();
        let rq = ResidualQuantizer::new(cbs).unwrap();
        let z = LatentSequence::new(dim, uniform(&mut r, frames * dim, -5.0, 5.0)).unwrap();
        let sampled = ndvq_core::quantizer::quantize_train(&rq, &z, &mut r).unwrap();
        let mean_only = quantize_infer(&rq, &z).unwrap();
        for out in [sampled, mean_only] {
            for ((q, e), x) in out.quantized.as_slice().iter().zip(out.final_residual.as_slice()).zip(z.as_slice()) {
                worst = worst.max((q + e - x).abs());
            }
        }
    }
    worst
}
