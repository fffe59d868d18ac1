use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::metrics::{evaluate, EvalReport, EvalReportDelta};
use crate::quantizer::QuantizerKind;
use crate::scalar::Scalar;
use crate::signal::AudioBuffer;
use crate::training::{save_checkpoint, split_dataset, train_step, LossRecord, TrainError, TrainState};

pub const HISTORY_FILE: &str = "loss_history.csv";
pub const FINAL_CHECKPOINT_DIR: &str = "checkpoint";
pub const CHECKPOINTS_DIR: &str = "checkpoints";
pub const REPORT_FILE: &str = "report.json";

/// Trained state and per-step loss history.
#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub state: TrainState<T>,
    pub history: Vec<LossRecord>,
}

/// Trains on `clips` for `config.train.steps` steps.
///
/// With `out_dir`, writes the resolved `config.toml`, an append-only
/// `loss_history.csv`, intermediate checkpoints under `checkpoints/step_NNNNNN`
/// every `checkpoint_every` steps and the final checkpoint under `checkpoint/`.
pub fn train<T: Scalar>(
    config: &ExperimentConfig,
    clips: &[AudioBuffer<T>],
    out_dir: Option<&Path>,
) -> Result<TrainOutcome<T>, TrainError> {
    config.validate()?;
    let cfg = &config.train;
    let mut state = TrainState::initialize(&config.codec, cfg, clips)?;
    let mut csv = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("config.toml"), config.to_toml())?;
            let mut w = BufWriter::new(File::create(dir.join(HISTORY_FILE))?);
            writeln!(w, "{}", LossRecord::CSV_HEADER)?;
            Some(w)
        }
        None => None,
    };
    let mut history = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let picks = state.next_batch(clips.len(), cfg.batch_size);
        let batch: Vec<AudioBuffer<T>> = picks.iter().map(|&i| clips[i].clone()).collect();
        let record = train_step(&mut state, &batch, cfg)?;
        if record.step % 100 == 0 {
            log::info!(
                "step {} total {:.5} time {:.5} mel {:.5} codebook {:.5}",
                record.step,
                record.total,
                record.time_l1,
                record.mel,
                record.codebook
            );
        }
        if let Some(w) = csv.as_mut() {
            writeln!(w, "{}", record.to_csv_row())?;
        }
        history.push(record);
        if let (Some(dir), true) = (out_dir, cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0) {
            if let Some(w) = csv.as_mut() {
                w.flush()?;
            }
            let sub = dir.join(CHECKPOINTS_DIR).join(format!("step_{:06}", state.step));
            save_checkpoint(sub, config, &state.model, &state.rq)?;
        }
    }
    if let Some(dir) = out_dir {
        if let Some(mut w) = csv.take() {
            w.flush()?;
        }
        save_checkpoint(dir.join(FINAL_CHECKPOINT_DIR), config, &state.model, &state.rq)?;
    }
    Ok(TrainOutcome { state, history })
}

/// One side of a quantizer comparison.
#[derive(Debug, Clone)]
pub struct ComparedRun<T> {
    pub kind: QuantizerKind,
    pub outcome: TrainOutcome<T>,
    /// Held-out evaluation with every trained layer active.
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub first: EvalReport,
    pub second: EvalReport,
    /// `second - first`.
    pub delta: EvalReportDelta,
}

#[derive(Debug, Clone)]
pub struct QuantizerComparison<T> {
    pub first: ComparedRun<T>,
    pub second: ComparedRun<T>,
}

impl<T> QuantizerComparison<T> {
    pub fn summary(&self) -> ComparisonSummary {
        ComparisonSummary {
            first: self.first.report.clone(),
            second: self.second.report.clone(),
            delta: EvalReportDelta::between(&self.first.report, &self.second.report),
        }
    }
}

/// Trains two quantizer kinds with the same seed, data order, backbone
/// initialization and step count, and evaluates both on the held-out split.
///
/// With `out_dir`, each run writes its training outputs and `report.json`
/// under a subdirectory named after its kind.
pub fn compare_kinds<T: Scalar>(
    config: &ExperimentConfig,
    dataset: &[AudioBuffer<T>],
    seed: u64,
    kinds: [QuantizerKind; 2],
    out_dir: Option<&Path>,
) -> Result<QuantizerComparison<T>, TrainError> {
    let (train_set, held_out) = split_dataset(dataset);
    let run = |kind: QuantizerKind| -> Result<ComparedRun<T>, TrainError> {
        let mut cfg = config.clone();
        cfg.train.seed = seed;
        cfg.train.quantizer = kind;
        let dir = out_dir.map(|d| d.join(kind.to_string()));
        let outcome = train(&cfg, &train_set, dir.as_deref())?;
        let n_q = outcome.state.rq.active_layers();
        let report = evaluate(&outcome.state.model, &outcome.state.rq, &held_out, n_q)?;
        if let Some(dir) = &dir {
            std::fs::write(dir.join(REPORT_FILE), report.to_json())?;
        }
        Ok(ComparedRun { kind, outcome, report })
    };
    Ok(QuantizerComparison { first: run(kinds[0])?, second: run(kinds[1])? })
}

/// NDVQ first, Euclidean baseline second.
pub fn compare_quantizers<T: Scalar>(
    config: &ExperimentConfig,
    dataset: &[AudioBuffer<T>],
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<QuantizerComparison<T>, TrainError> {
    compare_kinds(config, dataset, seed, [QuantizerKind::Ndvq, QuantizerKind::Euclidean], out_dir)
}
