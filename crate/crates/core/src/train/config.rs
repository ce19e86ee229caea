use serde::{Deserialize, Serialize};

use super::layout::SubspaceLayout;
use crate::error::{Error, Result};
use crate::nn::checkpoint::config_hash;
use crate::objective::Objective;

/// Sign convention of the adversarial terms.
///
/// `AsPrinted` uses the expressions of the training algorithms verbatim:
/// the encoder minimises `log(1 − D(z'')) + log D(z')` and the discriminator
/// minimises `log D(z'') + log(1 − D(z'))`, where `z'` are joint samples and
/// `z''` shuffled ones. `NegLogLikelihood` replaces both with cross-entropies:
/// the discriminator labels joint samples 1 and shuffled samples 0, and the
/// encoder minimises the cross-entropy of the flipped labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossForm {
    #[default]
    AsPrinted,
    NegLogLikelihood,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub objective: Objective,
    pub lr_encoder: f64,
    pub lr_classifiers: f64,
    pub lr_discriminator: f64,
    pub adversarial_weight: f64,
    /// Epochs at the start during which the encoder ignores the adversarial
    /// term; the discriminator trains throughout.
    #[serde(default)]
    pub warmup_epochs: usize,
    pub pack_size: usize,
    pub inner_classifier_steps: usize,
    /// Discriminator updates per encoder update.
    pub discriminator_steps: usize,
    pub epochs: usize,
    pub batch: usize,
    pub layout: SubspaceLayout,
    pub encoder_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub loss_form: LossForm,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            objective: Objective::Base,
            lr_encoder: 1e-3,
            lr_classifiers: 1e-3,
            lr_discriminator: 1e-3,
            adversarial_weight: 1.0,
            warmup_epochs: 0,
            pack_size: 1,
            inner_classifier_steps: 1,
            discriminator_steps: 1,
            epochs: 10,
            batch: 100,
            layout: SubspaceLayout { dims: vec![5, 5] },
            encoder_hidden: vec![50, 50, 50],
            discriminator_hidden: vec![50, 50, 50],
            loss_form: LossForm::AsPrinted,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn latent_dim(&self) -> usize {
        self.layout.latent_dim()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, lr) in [
            ("lr_encoder", self.lr_encoder),
            ("lr_classifiers", self.lr_classifiers),
            ("lr_discriminator", self.lr_discriminator),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {lr}")));
            }
        }
        if !(self.adversarial_weight >= 0.0 && self.adversarial_weight.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "adversarial weight must be non-negative, got {}",
                self.adversarial_weight
            )));
        }
        if self.pack_size == 0 || self.inner_classifier_steps == 0 || self.discriminator_steps == 0 {
            return Err(Error::InvalidArgument(
                "pack size, inner classifier steps and discriminator steps must be at least 1".into(),
            ));
        }
        if self.batch == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if self.objective.is_adversarial() && self.batch < self.pack_size {
            return Err(Error::InvalidArgument(format!(
                "batch {} smaller than pack size {}",
                self.batch, self.pack_size
            )));
        }
        SubspaceLayout::new(self.layout.dims.clone())?;
        if self.encoder_hidden.contains(&0) || self.discriminator_hidden.contains(&0) {
            return Err(Error::InvalidArgument("hidden widths must be positive".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}
