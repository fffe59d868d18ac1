use serde::{Deserialize, Serialize};

use crate::losses::LossWeights;
use crate::numerics::AdamConfig;
use crate::quantizer::QuantizerKind;
use crate::training::TrainError;

/// Which gradients reach the codebook sigmas (and means) during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaGradient {
    /// Sigma learns only from the `gamma |sigma|^2` term and means only from the
    /// `beta` term of the codebook loss; reconstruction reaches the encoder straight through.
    Literal,
    /// Reconstruction gradients also flow into mean and sigma through the sample `mu + eps * sigma`.
    Reparameterized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub seed: u64,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weights: LossWeights,
    pub adam: AdamConfig,
    pub quantizer: QuantizerKind,
    pub sigma_gradient: SigmaGradient,
    /// Layers used while training; all layers when absent.
    pub n_q: Option<usize>,
    pub gan_enabled: bool,
    /// Steps before the first discriminator update; a tenth of `steps` when absent.
    pub discriminator_warmup_steps: Option<usize>,
    pub discriminator_hidden: usize,
    pub grad_clip_norm: f64,
    /// Write an intermediate checkpoint every this many steps; 0 disables them.
    pub checkpoint_every: usize,
    /// Usage-EMA threshold below which baseline codes are re-seeded; disabled when absent.
    pub dead_code_threshold: Option<f64>,
    /// Rescale the encoder output at initialization so pooled training latents have this RMS.
    pub latent_init_rms: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            steps: 2000,
            batch_size: 4,
            learning_rate: 3e-4,
            weights: LossWeights::default(),
            adam: AdamConfig::default(),
            quantizer: QuantizerKind::Ndvq,
            sigma_gradient: SigmaGradient::Literal,
            n_q: None,
            gan_enabled: false,
            discriminator_warmup_steps: None,
            discriminator_hidden: 8,
            grad_clip_norm: 1.0,
            checkpoint_every: 0,
            dead_code_threshold: None,
            latent_init_rms: Some(4.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!("learning_rate must be non-negative, got {}", self.learning_rate));
        }
        if !(self.grad_clip_norm.is_finite() && self.grad_clip_norm > 0.0) {
            return bad(format!("grad_clip_norm must be positive, got {}", self.grad_clip_norm));
        }
        if self.n_q == Some(0) {
            return bad("n_q must be at least 1".into());
        }
        if self.discriminator_hidden == 0 {
            return bad("discriminator_hidden must be at least 1".into());
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.epsilon > 0.0) {
            return bad("adam betas must lie in [0, 1) and epsilon must be positive".into());
        }
        if let Some(r) = self.latent_init_rms {
            if !(r.is_finite() && r > 0.0) {
                return bad(format!("latent_init_rms must be positive, got {r}"));
            }
        }
        self.weights.validate()?;
        Ok(())
    }

    pub fn warmup_steps(&self) -> usize {
        self.discriminator_warmup_steps.unwrap_or(self.steps / 10)
    }
}
