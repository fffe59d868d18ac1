use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ndvq_core::codec::{bandwidth_to_nq, pack_bitstream, unpack_bitstream, BitstreamHeader, CodecConfig};
use ndvq_core::config::ExperimentConfig;
use ndvq_core::metrics::evaluate;
use ndvq_core::quantizer::{decode_indices, quantize_infer, LayerUsage};
use ndvq_core::signal::{load_wav, save_wav};
use ndvq_core::training::{generate_dataset, load_checkpoint, split_dataset, train as run_training, Checkpoint};
use ndvq_core::AudioBuffer32;

const HIGHLIGHT_LAYERS: [usize; 4] = [1, 8, 16, 32];

fn resolve_config(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut all: Vec<String> = overrides.to_vec();
    if let Some(seed) = seed {
        all.push(format!("train.seed={seed}"));
    }
    let cfg = match path {
        Some(p) => ExperimentConfig::load(p, &all)?,
        None => ExperimentConfig::with_overrides(&ExperimentConfig::acceptance(), &all)?,
    };
    Ok(cfg)
}

fn open_checkpoint(dir: &Path) -> Result<Checkpoint<f32>> {
    load_checkpoint(dir).with_context(|| format!("loading checkpoint {}", dir.display()))
}

pub fn train(config: Option<&Path>, overrides: &[String], seed: Option<u64>, out: &Path) -> Result<()> {
    let cfg = resolve_config(config, overrides, seed)?;
    log::info!("resolved configuration:\n{}", cfg.to_toml());
    let clips = generate_dataset::<f32>(&cfg.data, cfg.train.seed)?;
    let (train_set, _) = split_dataset(&clips);
    let outcome = run_training(&cfg, &train_set, Some(out))?;
    if let Some(last) = outcome.history.last() {
        log::info!("finished {} steps, final total loss {:.6}", outcome.state.step, last.total);
    }
    println!("wrote {}", out.display());
    Ok(())
}

pub fn encode(checkpoint: &Path, input: &Path, output: &Path, bandwidth: Option<f64>) -> Result<()> {
    let ckpt = open_checkpoint(checkpoint)?;
    let codec = &ckpt.config.codec;
    let n_q = match bandwidth {
        Some(bw) => bandwidth_to_nq(bw, codec.frame_rate(), codec.bits_per_code(), codec.max_layers)?,
        None => codec.max_layers,
    };
    let audio: AudioBuffer32 = load_wav(input).with_context(|| format!("reading {}", input.display()))?;
    let mut rq = ckpt.rq;
    rq.set_active_layers(n_q)?;
    let latents = ckpt.model.encode(&audio)?;
    let result = quantize_infer(&rq, &latents)?;
    let header = BitstreamHeader::for_config(codec, n_q, latents.frames())?;
    let bytes = pack_bitstream(&header, &result.indices)?;
    std::fs::write(output, &bytes).with_context(|| format!("writing {}", output.display()))?;
    let seconds = audio.duration_secs();
    let payload_kbps = header.payload_bits() as f64 / seconds / 1000.0;
    let file_kbps = (bytes.len() * 8) as f64 / seconds / 1000.0;
    println!("layers={n_q} frames={} bytes={}", latents.frames(), bytes.len());
    println!("nominal_kbps={:.3}", n_q as f64 * codec.frame_rate() * codec.bits_per_code() as f64 / 1000.0);
    println!("payload_kbps={payload_kbps:.3}");
    println!("file_kbps={file_kbps:.3}");
    Ok(())
}

fn check_header(header: &BitstreamHeader, codec: &CodecConfig) -> Result<()> {
    let strides: Vec<usize> = header.strides.iter().map(|&s| s as usize).collect();
    let checks: [(&str, String, String); 4] = [
        ("sample_rate", header.sample_rate.to_string(), codec.sample_rate.to_string()),
        ("strides", format!("{strides:?}"), format!("{:?}", codec.strides)),
        ("latent_dim", header.latent_dim.to_string(), codec.latent_dim.to_string()),
        ("codebook_size", header.codebook_size.to_string(), codec.codebook_size.to_string()),
    ];
    for (field, stream, model) in checks {
        if stream != model {
            bail!("bitstream {field} is {stream} but the checkpoint has {model}");
        }
    }
    if header.n_q as usize > codec.max_layers {
        bail!("bitstream uses {} layers but the checkpoint has {}", header.n_q, codec.max_layers);
    }
    Ok(())
}

pub fn decode(checkpoint: &Path, input: &Path, output: &Path) -> Result<()> {
    let ckpt = open_checkpoint(checkpoint)?;
    let bytes = std::fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    let (header, grid) = unpack_bitstream(&bytes)?;
    check_header(&header, &ckpt.config.codec)?;
    let latents = decode_indices(&ckpt.rq, &grid)?;
    let audio = ckpt.model.decode(&latents, None)?;
    save_wav(output, &audio).with_context(|| format!("writing {}", output.display()))?;
    println!("samples={} sample_rate={}", audio.len(), audio.sample_rate);
    Ok(())
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")));
    files.sort();
    if files.is_empty() {
        bail!("no .wav files in {}", dir.display());
    }
    Ok(files)
}

fn eval_clips(cfg: &ExperimentConfig, data_dir: Option<&Path>, seed: Option<u64>) -> Result<Vec<AudioBuffer32>> {
    match data_dir {
        Some(dir) => wav_files(dir)?
            .iter()
            .map(|p| load_wav(p).with_context(|| format!("reading {}", p.display())))
            .collect(),
        None => {
            let clips = generate_dataset::<f32>(&cfg.data, seed.unwrap_or(cfg.train.seed))?;
            Ok(split_dataset(&clips).1)
        }
    }
}

fn kbps_label(bw: f64) -> String {
    format!("{bw}").replace('.', "p")
}

pub fn eval(
    checkpoint: &Path,
    data_dir: Option<&Path>,
    bandwidths: &[f64],
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<()> {
    let ckpt = open_checkpoint(checkpoint)?;
    let codec = &ckpt.config.codec;
    let mut requested = bandwidths.to_vec();
    if requested.is_empty() {
        requested = ckpt.config.eval.bandwidths.clone();
    }
    let layer_counts: Vec<(String, usize)> = if requested.is_empty() {
        vec![("all".to_string(), codec.max_layers)]
    } else {
        requested
            .iter()
            .map(|&bw| {
                let n = bandwidth_to_nq(bw, codec.frame_rate(), codec.bits_per_code(), codec.max_layers)?;
                Ok((kbps_label(bw), n))
            })
            .collect::<Result<_>>()?
    };
    let clips = eval_clips(&ckpt.config, data_dir, seed)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    for (label, n_q) in layer_counts {
        let report = evaluate(&ckpt.model, &ckpt.rq, &clips, n_q)?;
        print!("{}", report.to_text());
        println!();
        if let Some(dir) = out {
            std::fs::write(dir.join(format!("report_{label}.txt")), report.to_text())?;
            std::fs::write(dir.join(format!("report_{label}.json")), report.to_json())?;
        }
    }
    Ok(())
}

pub fn stats(checkpoint: &Path, data_dir: Option<&Path>, synthetic: bool, seed: Option<u64>) -> Result<()> {
    let ckpt = open_checkpoint(checkpoint)?;
    let rq = &ckpt.rq;
    println!(
        "kind={} layers={} codebook_size={} dim={}",
        rq.kind(),
        rq.n_layers(),
        rq.codebook_size(),
        rq.dim()
    );
    println!("{:>5} {:>10} {:>10} {:>10} {:>10} {:>10}", "layer", "mean_norm", "max_norm", "sigma_min", "sigma_max", "sigma_mean");
    for (i, layer) in rq.layers().iter().enumerate() {
        let norms: Vec<f64> = layer
            .means()
            .chunks_exact(layer.dim())
            .map(|m| m.iter().map(|&v| f64::from(v).powi(2)).sum::<f64>().sqrt())
            .collect();
        let mean_norm = norms.iter().sum::<f64>() / norms.len() as f64;
        let max_norm = norms.iter().cloned().fold(0.0, f64::max);
        let (lo, hi, avg) = match layer.as_normal() {
            Some(cb) => {
                let s: Vec<f64> = cb.log_sigmas().iter().map(|&v| f64::from(v).exp()).collect();
                let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (format!("{lo:.4}"), format!("{hi:.4}"), format!("{:.4}", s.iter().sum::<f64>() / s.len() as f64))
            }
            None => ("-".into(), "-".into(), "-".into()),
        };
        println!("{:>5} {mean_norm:>10.4} {max_norm:>10.4} {lo:>10} {hi:>10} {avg:>10}", i + 1);
    }
    if data_dir.is_none() && !synthetic {
        return Ok(());
    }
    let clips = eval_clips(&ckpt.config, data_dir, seed)?;
    let mut usage = LayerUsage::new(rq.n_layers(), rq.codebook_size());
    for clip in &clips {
        let z = ckpt.model.encode(clip)?;
        usage.record_grid(&quantize_infer(rq, &z)?.indices)?;
    }
    let entropies = usage.entropies()?;
    println!();
    println!("usage entropy (bits, max {:.2})", (rq.codebook_size() as f64).log2());
    println!("{:>7} {:>8}", "layer", "entropy");
    for (i, h) in entropies.iter().enumerate() {
        let mark = if HIGHLIGHT_LAYERS.contains(&(i + 1)) { "*" } else { " " };
        println!("{mark}{:>6} {h:>8.2}", i + 1);
    }
    Ok(())
}
