//! Experiment configuration: TOML files plus dotted `key=value` overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::CodecConfig;
use crate::training::{SigmaGradient, SyntheticDatasetConfig, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("bad override {0:?}: {1}")]
    Override(String, String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Bandwidths in kbps to evaluate; every layer count when empty.
    pub bandwidths: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { bandwidths: Vec::new() }
    }
}

/// Codec shape, training schedule, synthetic data and evaluation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub codec: CodecConfig,
    pub train: TrainConfig,
    pub data: SyntheticDatasetConfig,
    pub eval: EvalConfig,
}

impl ExperimentConfig {
    /// Acceptance codec, 2000 steps on 80 synthetic 1024-sample clips, with
    /// reconstruction gradients reaching the codebooks through the samples.
    pub fn acceptance() -> Self {
        let mut cfg = Self { codec: CodecConfig::acceptance(), ..Self::default() };
        cfg.data.clip_length = 1024;
        cfg.train.sigma_gradient = SigmaGradient::Reparameterized;
        cfg
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.codec.validate().map_err(|e| invalid(&e))?;
        self.train.validate().map_err(|e| invalid(&e))?;
        self.data.validate().map_err(|e| invalid(&e))?;
        if self.data.sample_rate != self.codec.sample_rate {
            return Err(ConfigError::Invalid(format!(
                "data.sample_rate {} differs from codec.sample_rate {}",
                self.data.sample_rate, self.codec.sample_rate
            )));
        }
        if self.data.clip_length < self.codec.stride_product() || self.data.clip_length < crate::losses::MEL_WINDOWS[0] {
            return Err(ConfigError::Invalid(format!(
                "data.clip_length {} must be at least the stride product {} and 32",
                self.data.clip_length,
                self.codec.stride_product()
            )));
        }
        if let Some(n_q) = self.train.n_q {
            if n_q > self.codec.max_layers {
                return Err(ConfigError::Invalid(format!(
                    "train.n_q {n_q} exceeds codec.max_layers {}",
                    self.codec.max_layers
                )));
            }
        }
        if self.data.n_clips < 2 {
            return Err(ConfigError::Invalid("data.n_clips must be at least 2 (one held out)".into()));
        }
        Ok(())
    }

    /// Parses TOML text, applies `key=value` overrides and validates.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut value: toml::Value = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: Self = value.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text, overrides)
    }

    /// The defaults with overrides applied.
    pub fn with_overrides(base: &Self, overrides: &[String]) -> Result<Self, ConfigError> {
        Self::from_toml_str(&base.to_toml(), overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

/// Sets a dotted key such as `train.steps=10`. The value is parsed as a TOML
/// value and falls back to a plain string.
fn apply_override(root: &mut toml::Value, spec: &str) -> Result<(), ConfigError> {
    let err = |m: &str| ConfigError::Override(spec.to_string(), m.to_string());
    let (key, raw) = spec.split_once('=').ok_or_else(|| err("expected key=value"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(err("empty key segment"));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().expect("non-empty");
    let mut node = root;
    for p in parts {
        let table = node.as_table_mut().ok_or_else(|| err("path crosses a non-table value"))?;
        node = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
    }
    let table = node.as_table_mut().ok_or_else(|| err("path crosses a non-table value"))?;
    table.insert(leaf.to_string(), value);
    Ok(())
}
