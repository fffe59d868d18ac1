//! Checkpoint directories: `config.toml`, `codebooks.ndvq` and `model.ndvw`.

use std::path::Path;

use crate::codec::{load_weights, save_weights, ToyCodecModel};
use crate::config::ExperimentConfig;
use crate::quantizer::{load_codebooks, save_codebooks, ResidualQuantizer};
use crate::scalar::Scalar;
use crate::training::TrainError;

pub const CONFIG_FILE: &str = "config.toml";
pub const CODEBOOK_FILE: &str = "codebooks.ndvq";
pub const WEIGHTS_FILE: &str = "model.ndvw";

/// A loaded checkpoint.
#[derive(Debug, Clone)]
pub struct Checkpoint<T> {
    pub config: ExperimentConfig,
    pub model: ToyCodecModel<T>,
    /// All layers active.
    pub rq: ResidualQuantizer<T>,
}

pub fn save_checkpoint<T: Scalar>(
    dir: impl AsRef<Path>,
    config: &ExperimentConfig,
    model: &ToyCodecModel<T>,
    rq: &ResidualQuantizer<T>,
) -> Result<(), TrainError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(CONFIG_FILE), config.to_toml())?;
    save_codebooks(dir.join(CODEBOOK_FILE), rq)?;
    save_weights(dir.join(WEIGHTS_FILE), model)?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(dir: impl AsRef<Path>) -> Result<Checkpoint<T>, TrainError> {
    let dir = dir.as_ref();
    let config = ExperimentConfig::load(dir.join(CONFIG_FILE), &[])?;
    let model = load_weights(dir.join(WEIGHTS_FILE), config.codec.clone())?;
    let rq: ResidualQuantizer<T> = load_codebooks(dir.join(CODEBOOK_FILE))?;
    let codec = &config.codec;
    for (field, found, expected) in [
        ("codebook_size", rq.codebook_size(), codec.codebook_size),
        ("latent_dim", rq.dim(), codec.latent_dim),
        ("max_layers", rq.n_layers(), codec.max_layers),
    ] {
        if found != expected {
            return Err(TrainError::CheckpointMismatch { field, found, expected });
        }
    }
    Ok(Checkpoint { config, model, rq })
}
