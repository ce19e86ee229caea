//! Named experiment bundles: training configuration, data configuration and
//! evaluation grid for each experiment.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{make_pair_batch, mask_labels, DigitPools, MnistSplits, sample_correlated_attributes, toy_observations, AttributeTable, OcclusionParams};
use crate::error::{Error, Result};
use crate::eval::{PairTask, ToyTask};
use crate::objective::Objective;
use crate::train::{accuracy, train, FixedSource, PairSource, LossForm, Models, SubspaceLayout, TrainConfig, TrainLog};

pub const PRESET_NAMES: [&str; 7] = [
    "table1",
    "toy-reg",
    "toy-cls-K2",
    "toy-cls-K4",
    "toy-cls-K10",
    "mnist-3-8",
    "weak-labels",
];

const STREAM_TRAIN_DATA: u64 = 1 << 20;
const STREAM_VAL_DATA: u64 = STREAM_TRAIN_DATA + 1;
const STREAM_LABEL_MASK: u64 = STREAM_TRAIN_DATA + 2;

fn data_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Binary toy classification `x = s + σ n` with `K` attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyClassification {
    pub k: usize,
    pub sigma: f64,
    pub rho_train: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Fraction of rows keeping each attribute label.
    pub label_fraction: f64,
}

impl ToyClassification {
    pub fn mixing(&self) -> Array2<f64> {
        Array2::eye(self.k)
    }

    fn sample(&self, rho: f64, n: usize, rng: &mut ChaCha8Rng) -> Result<(Array2<f64>, AttributeTable)> {
        let attrs = sample_correlated_attributes(self.k, rho, n, rng)?;
        let x = toy_observations(&attrs, &self.mixing(), self.sigma, rng)?;
        Ok((x, attrs))
    }

    /// Correlated training data, with labels masked when `label_fraction < 1`.
    pub fn train_set(&self, seed: u64) -> Result<(Array2<f64>, AttributeTable)> {
        let (x, attrs) = self.sample(self.rho_train, self.n_train, &mut data_rng(seed, STREAM_TRAIN_DATA))?;
        if self.label_fraction < 1.0 {
            let masked = mask_labels(&attrs, self.label_fraction, &mut data_rng(seed, STREAM_LABEL_MASK))?;
            return Ok((x, masked));
        }
        Ok((x, attrs))
    }

    /// Fully labeled validation data at the training correlation.
    pub fn val_set(&self, seed: u64) -> Result<(Array2<f64>, AttributeTable)> {
        self.sample(self.rho_train, self.n_val, &mut data_rng(seed, STREAM_VAL_DATA))
    }

    pub fn task(&self) -> ToyTask {
        ToyTask {
            mixing: self.mixing(),
            sigma: self.sigma,
            n: self.n_test,
        }
    }

    /// Test correlations: the full range for two attributes, non-negative
    /// ones otherwise.
    pub fn test_rhos(&self) -> Vec<f64> {
        let lo = if self.k == 2 { -10 } else { 0 };
        (lo..=10).step_by(2).map(|i| i as f64 / 10.0).collect()
    }
}

/// Toy training configuration per objective: a linear encoder with one latent
/// dimension per attribute and a two-layer discriminator on packs of 10.
pub fn toy_train_config(objective: Objective, k: usize, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig {
        objective,
        lr_encoder: 1e-2,
        lr_classifiers: 1e-2,
        lr_discriminator: 1e-3,
        adversarial_weight: 100.0,
        warmup_epochs: 0,
        pack_size: 10,
        inner_classifier_steps: 1,
        discriminator_steps: 1,
        epochs: 100,
        batch: 500,
        layout: SubspaceLayout { dims: vec![1; k] },
        encoder_hidden: Vec::new(),
        discriminator_hidden: vec![50, 50],
        loss_form: LossForm::NegLogLikelihood,
        seed,
    };
    if objective == Objective::BaseMi {
        cfg.lr_encoder = 1e-4;
        cfg.lr_classifiers = 1e-4;
        cfg.inner_classifier_steps = 10;
    }
    cfg
}

/// Occluded 3-vs-8 digit pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnistPreset {
    pub rho_train: f64,
    pub occlusion: OcclusionParams,
    pub batches_per_epoch: usize,
    pub n_val: usize,
    pub n_test: usize,
}

impl MnistPreset {
    pub fn source(&self, train: &DigitPools) -> PairSource {
        PairSource {
            pools: train.clone(),
            rho: self.rho_train,
            occlusion: self.occlusion,
            batches_per_epoch: self.batches_per_epoch,
        }
    }

    pub fn task(&self, test: &DigitPools) -> PairTask {
        PairTask {
            pools: test.clone(),
            occlusion: self.occlusion,
            n: self.n_test,
        }
    }
}

pub fn mnist_train_config(objective: Objective, seed: u64) -> TrainConfig {
    TrainConfig {
        objective,
        lr_encoder: 1e-3,
        lr_classifiers: 1e-3,
        lr_discriminator: 1e-3,
        adversarial_weight: 1.0,
        warmup_epochs: 0,
        pack_size: 1,
        inner_classifier_steps: 1,
        discriminator_steps: 1,
        epochs: 400,
        batch: 100,
        layout: SubspaceLayout { dims: vec![5, 5] },
        encoder_hidden: vec![50, 50, 50],
        discriminator_hidden: vec![50, 50, 50],
        loss_form: LossForm::NegLogLikelihood,
        seed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PresetKind {
    Analytic { rho: f64, sigma2: f64 },
    ToyRegression { k: usize, rho_train: f64, sigma2: f64, n_eval: usize },
    ToyClassification(ToyClassification),
    Mnist(MnistPreset),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPreset {
    pub name: String,
    pub data: PresetKind,
    pub objectives: Vec<Objective>,
    pub seeds: Vec<u64>,
    pub test_rhos: Vec<f64>,
    /// Learning-rate values searched per component; empty means no search.
    pub lr_grid: Vec<f64>,
}

fn toy_cls(k: usize, label_fraction: f64) -> ToyClassification {
    ToyClassification {
        k,
        sigma: 0.8,
        rho_train: 0.8,
        n_train: 10_000,
        n_val: 5_000,
        n_test: 5_000,
        label_fraction,
    }
}

fn symmetric_grid() -> Vec<f64> {
    (-10..=10).step_by(2).map(|i| i as f64 / 10.0).collect()
}

pub fn preset(name: &str) -> Result<ExperimentPreset> {
    let all = Objective::ALL.to_vec();
    let three = vec![0, 1, 2];
    let toy = |k: usize, fraction: f64, name: &str| {
        let data = toy_cls(k, fraction);
        ExperimentPreset {
            name: name.to_string(),
            test_rhos: data.test_rhos(),
            data: PresetKind::ToyClassification(data),
            objectives: all.clone(),
            seeds: three.clone(),
            lr_grid: Vec::new(),
        }
    };
    Ok(match name {
        "table1" => ExperimentPreset {
            name: name.into(),
            data: PresetKind::Analytic { rho: 0.8, sigma2: 0.1 },
            objectives: all,
            seeds: vec![0],
            test_rhos: vec![0.0],
            lr_grid: Vec::new(),
        },
        "toy-reg" => ExperimentPreset {
            name: name.into(),
            data: PresetKind::ToyRegression {
                k: 2,
                rho_train: 0.8,
                sigma2: 0.1,
                n_eval: 100_000,
            },
            objectives: all,
            seeds: three,
            test_rhos: symmetric_grid(),
            lr_grid: Vec::new(),
        },
        "toy-cls-K2" => toy(2, 1.0, name),
        "toy-cls-K4" => toy(4, 1.0, name),
        "toy-cls-K10" => toy(10, 1.0, name),
        "weak-labels" => toy(2, 0.25, name),
        "mnist-3-8" => ExperimentPreset {
            name: name.into(),
            data: PresetKind::Mnist(MnistPreset {
                rho_train: 0.9,
                occlusion: OcclusionParams::with_level(0.6),
                batches_per_epoch: 500,
                n_val: 10_000,
                n_test: 10_000,
            }),
            objectives: all,
            seeds: three,
            test_rhos: symmetric_grid(),
            lr_grid: vec![1e-5, 1e-4, 1e-3],
        },
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown preset `{other}`; expected one of {}",
                PRESET_NAMES.join(", ")
            )))
        }
    })
}

impl ExperimentPreset {
    pub fn train_config(&self, objective: Objective, seed: u64) -> Option<TrainConfig> {
        match &self.data {
            PresetKind::ToyClassification(t) => Some(toy_train_config(objective, t.k, seed)),
            PresetKind::Mnist(_) => Some(mnist_train_config(objective, seed)),
            _ => None,
        }
    }
}

/// A trained model with its accuracy on validation data at the training
/// correlation.
#[derive(Debug, Clone)]
pub struct PresetRun {
    pub models: Models,
    pub log: TrainLog,
    pub val_accuracy: f64,
}

pub fn run_toy(data: &ToyClassification, config: &TrainConfig) -> Result<PresetRun> {
    let (x, attrs) = data.train_set(config.seed)?;
    let (models, log) = train(&mut FixedSource::new(x, attrs)?, config)?;
    let (vx, va) = data.val_set(config.seed)?;
    let acc = accuracy(&models, &vx, &va)?;
    Ok(PresetRun {
        models,
        log,
        val_accuracy: acc.iter().sum::<f64>() / acc.len() as f64,
    })
}

pub fn run_mnist(data: &MnistPreset, splits: &MnistSplits, config: &TrainConfig) -> Result<PresetRun> {
    let (models, log) = train(&mut data.source(&splits.train), config)?;
    let mut rng = data_rng(config.seed, STREAM_VAL_DATA);
    let val = make_pair_batch(&splits.val.threes, &splits.val.eights, data.rho_train, &data.occlusion, data.n_val, &mut rng)?;
    let acc = accuracy(&models, &val.flat(), &val.attributes())?;
    Ok(PresetRun {
        models,
        log,
        val_accuracy: acc.iter().sum::<f64>() / acc.len() as f64,
    })
}
