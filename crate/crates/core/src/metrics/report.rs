use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::ToyCodecModel;
use crate::metrics::{mel_distance, si_sdr, stft_distance, MetricsError};
use crate::quantizer::{quantize_infer, quantize_train, CodeIndexGrid, LayerUsage, ResidualQuantizer};
use crate::scalar::Scalar;
use crate::signal::AudioBuffer;

/// Metrics of one reconstructed clip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipMetrics {
    pub si_sdr: f64,
    pub mel_distance: f64,
    pub stft_distance: f64,
}

pub fn clip_metrics<T: Scalar>(x: &AudioBuffer<T>, x_hat: &AudioBuffer<T>) -> Result<ClipMetrics, MetricsError> {
    Ok(ClipMetrics {
        si_sdr: si_sdr(x, x_hat)?,
        mel_distance: mel_distance(x, x_hat)?,
        stft_distance: stft_distance(x, x_hat)?,
    })
}

/// Dataset-level evaluation at one bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub clips: usize,
    pub n_q: usize,
    pub bandwidth_kbps: f64,
    pub si_sdr_db: f64,
    pub mel_distance: f64,
    pub stft_distance: f64,
    /// Usage entropy in bits of each active layer, from histograms pooled over all clips.
    pub entropy_bits: Vec<f64>,
}

impl EvalReport {
    /// One `key=value` pair per line.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "clips={}\nn_q={}\nbandwidth_kbps={}\nsi_sdr_db={}\nmel_distance={}\nstft_distance={}\n",
            self.clips, self.n_q, self.bandwidth_kbps, self.si_sdr_db, self.mel_distance, self.stft_distance
        );
        for (i, h) in self.entropy_bits.iter().enumerate() {
            s.push_str(&format!("entropy_layer_{}={h}\n", i + 1));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    fn from_clips(clips: &[ClipMetrics], n_q: usize, bandwidth_kbps: f64, entropy_bits: Vec<f64>) -> Self {
        let n = clips.len() as f64;
        let mean = |f: fn(&ClipMetrics) -> f64| clips.iter().map(f).sum::<f64>() / n;
        Self {
            clips: clips.len(),
            n_q,
            bandwidth_kbps,
            si_sdr_db: mean(|c| c.si_sdr),
            mel_distance: mean(|c| c.mel_distance),
            stft_distance: mean(|c| c.stft_distance),
            entropy_bits,
        }
    }
}

/// `b - a` for every metric of two reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReportDelta {
    pub si_sdr_db: f64,
    pub mel_distance: f64,
    pub stft_distance: f64,
    pub entropy_bits: Vec<f64>,
}

impl EvalReportDelta {
    pub fn between(a: &EvalReport, b: &EvalReport) -> Self {
        Self {
            si_sdr_db: b.si_sdr_db - a.si_sdr_db,
            mel_distance: b.mel_distance - a.mel_distance,
            stft_distance: b.stft_distance - a.stft_distance,
            entropy_bits: a.entropy_bits.iter().zip(&b.entropy_bits).map(|(x, y)| y - x).collect(),
        }
    }
}

/// Per-layer entropies of histograms accumulated over every grid.
pub fn pooled_entropies(grids: &[CodeIndexGrid], codebook_size: usize) -> Result<Vec<f64>, MetricsError> {
    let layers = grids.iter().map(CodeIndexGrid::layers).max().unwrap_or(0);
    let mut usage = LayerUsage::new(layers, codebook_size);
    for grid in grids {
        usage.record_grid(grid)?;
    }
    Ok(usage.entropies()?)
}

fn run<T: Scalar>(
    model: &ToyCodecModel<T>,
    rq: &ResidualQuantizer<T>,
    dataset: &[AudioBuffer<T>],
    n_q: usize,
    sample_seed: Option<u64>,
) -> Result<EvalReport, MetricsError> {
    if dataset.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let mut rq = rq.clone();
    rq.set_active_layers(n_q)?;
    let per_clip: Vec<Result<(ClipMetrics, CodeIndexGrid), MetricsError>> = dataset
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let z = model.encode(x)?;
            let q = match sample_seed {
                None => quantize_infer(&rq, &z)?,
                Some(seed) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(i as u64);
                    quantize_train(&rq, &z, &mut rng)?
                }
            };
            let y = model.decode(&q.quantized, Some(x.len()))?;
            Ok((clip_metrics(x, &y)?, q.indices))
        })
        .collect();
    let mut clips = Vec::with_capacity(per_clip.len());
    let mut grids = Vec::with_capacity(per_clip.len());
    for r in per_clip {
        let (m, g) = r?;
        clips.push(m);
        grids.push(g);
    }
    let cfg = model.config();
    let bandwidth = cfg.frame_rate() * n_q as f64 * cfg.bits_per_code() as f64 / 1000.0;
    let entropy = pooled_entropies(&grids, rq.codebook_size())?;
    Ok(EvalReport::from_clips(&clips, n_q, bandwidth, entropy))
}

/// Mean-only reconstruction of every clip with `n_q` layers.
pub fn evaluate<T: Scalar>(
    model: &ToyCodecModel<T>,
    rq: &ResidualQuantizer<T>,
    dataset: &[AudioBuffer<T>],
    n_q: usize,
) -> Result<EvalReport, MetricsError> {
    run(model, rq, dataset, n_q, None)
}

/// Like [`evaluate`] but decodes reparameterized samples `mu + eps * sigma`,
/// with epsilon drawn from a stream seeded by `seed` and the clip index.
pub fn evaluate_sampled<T: Scalar>(
    model: &ToyCodecModel<T>,
    rq: &ResidualQuantizer<T>,
    dataset: &[AudioBuffer<T>],
    n_q: usize,
    seed: u64,
) -> Result<EvalReport, MetricsError> {
    run(model, rq, dataset, n_q, Some(seed))
}
