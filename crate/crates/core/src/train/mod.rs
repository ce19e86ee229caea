//! Base, Base+MI and Base+CMI training loops.

pub mod config;
pub mod layout;
pub mod log;
pub mod pack;
pub mod shuffle;
pub mod saved;
pub mod source;

use std::time::Instant;

use ndarray::{s, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{LossForm, TrainConfig};
pub use layout::{concat_subspaces, split_subspaces, SubspaceLayout};
pub use log::{StepRecord, TrainLog};
pub use pack::{PackFormat, PackPlan};
pub use shuffle::{conditional_shuffle, shuffle_marginals};
pub use saved::SavedModel;
pub use source::{BatchSource, FixedSource, PairSource};

use crate::data::AttributeTable;
use crate::error::{Error, Result};
use crate::nn::loss::bce_logits;
use crate::nn::{cross_entropy_masked, AdamState, Checkpoint, Mlp, MlpSpec};
use crate::objective::Objective;

const STREAM_INIT: u64 = 0;
const STREAM_DATA: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;

pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Encoder, one linear head per attribute and, for the adversarial
/// objectives, a discriminator.
#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub encoder: Mlp,
    pub heads: Vec<Mlp>,
    pub discriminator: Option<Mlp>,
    pub layout: SubspaceLayout,
    pub cardinalities: Vec<usize>,
}

impl Models {
    /// Heads start at zero; encoder and discriminator use the default
    /// uniform initialisation.
    pub fn init(config: &TrainConfig, input_dim: usize, cardinalities: &[usize], rng: &mut ChaCha8Rng) -> Result<Self> {
        let layout = config.layout.clone();
        if layout.k() != cardinalities.len() {
            return Err(Error::LayoutMismatch(format!(
                "{} subspaces for {} attributes",
                layout.k(),
                cardinalities.len()
            )));
        }
        let encoder = Mlp::new(MlpSpec::new(input_dim, &config.encoder_hidden, layout.latent_dim()), rng)?;
        let heads = layout
            .dims
            .iter()
            .zip(cardinalities)
            .map(|(&d, &c)| Mlp::zeros(MlpSpec::linear(d, c)))
            .collect::<Result<Vec<_>>>()?;
        let mut models = Models {
            encoder,
            heads,
            discriminator: None,
            layout,
            cardinalities: cardinalities.to_vec(),
        };
        if config.objective.is_adversarial() {
            let width = models.pack_format(config.objective, config.pack_size).width();
            models.discriminator = Some(Mlp::new(MlpSpec::new(width, &config.discriminator_hidden, 1), rng)?);
        }
        Ok(models)
    }

    pub fn pack_format(&self, objective: Objective, pack_size: usize) -> PackFormat {
        let conditioning = match objective {
            Objective::BaseCmi => Some((self.layout.k(), self.cardinalities.iter().copied().max().unwrap_or(2))),
            _ => None,
        };
        PackFormat {
            layout: self.layout.clone(),
            pack_size,
            conditioning,
        }
    }

    pub fn latents(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.encoder.predict(x)
    }

    pub fn logits(&self, x: &Array2<f64>) -> Result<Vec<Array2<f64>>> {
        let z = self.latents(x)?;
        split_subspaces(&z, &self.layout)?
            .iter()
            .zip(&self.heads)
            .map(|(zk, h)| h.predict(zk))
            .collect()
    }

    /// Predicted class index per row and attribute; ties go to the lower class.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<usize>> {
        let logits = self.logits(x)?;
        let mut out = Array2::zeros((x.nrows(), logits.len()));
        for (k, l) in logits.iter().enumerate() {
            for (i, row) in l.rows().into_iter().enumerate() {
                let mut best = 0;
                for (c, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = c;
                    }
                }
                out[(i, k)] = best;
            }
        }
        Ok(out)
    }

    pub fn checkpoint(&self, config_hash: &str) -> Checkpoint {
        let mut ck = Checkpoint::new(config_hash);
        ck.add("encoder", &self.encoder);
        ck.add("heads", &self.heads);
        if let Some(d) = &self.discriminator {
            ck.add("discriminator", d);
        }
        ck
    }

    pub fn restore(&mut self, ck: &Checkpoint) -> Result<()> {
        ck.restore("encoder", &mut self.encoder)?;
        ck.restore("heads", &mut self.heads)?;
        if let Some(d) = &mut self.discriminator {
            ck.restore("discriminator", d)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderStats {
    pub classification: Vec<f64>,
    pub adversarial: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminatorStats {
    pub loss: f64,
    pub accuracy: f64,
}

/// The two pack plans whose discrimination forms one adversarial term.
struct TermPlans {
    joint: PackPlan,
    shuffled: PackPlan,
}

fn term_plans(objective: Objective, attrs: &AttributeTable, pack_size: usize, rng: &mut ChaCha8Rng) -> Vec<TermPlans> {
    match objective {
        Objective::Base => Vec::new(),
        Objective::BaseMi => {
            let (joint, shuffled) = pack::unconditional_plans(attrs.n(), attrs.k(), pack_size, rng);
            vec![TermPlans { joint, shuffled }]
        }
        Objective::BaseCmi => (0..attrs.k())
            .map(|k| {
                let (joint, shuffled) = pack::conditional_plans(attrs, k, pack_size, rng);
                TermPlans { joint, shuffled }
            })
            .collect(),
    }
}

/// Logit-space loss and gradients `(value, d/dl_joint, d/dl_shuffled)` of
/// the discriminator (`for_encoder = false`) or encoder term.
fn adversarial_loss(form: LossForm, for_encoder: bool, joint: &[f64], shuffled: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let ones = |l: &[f64]| vec![1.0; l.len()];
    let zeros = |l: &[f64]| vec![0.0; l.len()];
    // (joint target, shuffled target, sign)
    let (tj, ts, sign) = match (form, for_encoder) {
        (LossForm::AsPrinted, true) => (ones(joint), zeros(shuffled), -1.0),
        (LossForm::AsPrinted, false) => (zeros(joint), ones(shuffled), -1.0),
        (LossForm::NegLogLikelihood, true) => (zeros(joint), ones(shuffled), 1.0),
        (LossForm::NegLogLikelihood, false) => (ones(joint), zeros(shuffled), 1.0),
    };
    let (lj, mut gj) = bce_logits(joint, &tj);
    let (ls, mut gs) = bce_logits(shuffled, &ts);
    gj.iter_mut().chain(gs.iter_mut()).for_each(|g| *g *= sign);
    (sign * (lj + ls), gj, gs)
}

fn column(v: Vec<f64>) -> Array2<f64> {
    let n = v.len();
    Array2::from_shape_vec((n, 1), v).expect("column")
}

fn heads_loss(models: &Models, z: &Array2<f64>, attrs: &AttributeTable) -> Result<(Vec<f64>, Vec<Mlp>, Array2<f64>)> {
    let parts = split_subspaces(z, &models.layout)?;
    let mut losses = Vec::with_capacity(parts.len());
    let mut grads = Vec::with_capacity(parts.len());
    let mut grad_z = Array2::zeros(z.raw_dim());
    for (k, (zk, head)) in parts.iter().zip(&models.heads).enumerate() {
        let (logits, cache) = head.forward(zk)?;
        let labels: Vec<usize> = attrs.labels.column(k).to_vec();
        let mask: Vec<bool> = attrs.mask.column(k).to_vec();
        let (loss, g) = cross_entropy_masked(&logits, &labels, Some(&mask))?;
        let (hg, gz) = head.backward(&cache, &g);
        grad_z.slice_mut(s![.., models.layout.range(k)]).assign(&gz);
        losses.push(loss);
        grads.push(hg);
    }
    Ok((losses, grads, grad_z))
}

/// Encoder-side adversarial term and its gradient with respect to `z`.
fn encoder_adversarial(
    disc: &Mlp,
    fmt: &PackFormat,
    form: LossForm,
    z: &Array2<f64>,
    plans: &[TermPlans],
) -> Result<(f64, Array2<f64>)> {
    let mut total = 0.0;
    let mut grad_z = Array2::zeros(z.raw_dim());
    for plan in plans {
        if plan.joint.packs() == 0 || plan.shuffled.packs() == 0 {
            continue;
        }
        let (lj, cj) = disc.forward(&fmt.build(&plan.joint, z))?;
        let (ls, cs) = disc.forward(&fmt.build(&plan.shuffled, z))?;
        let (value, gj, gs) = adversarial_loss(form, true, lj.as_slice().unwrap(), ls.as_slice().unwrap());
        total += value;
        let (_, gxj) = disc.backward(&cj, &column(gj));
        let (_, gxs) = disc.backward(&cs, &column(gs));
        fmt.scatter(&plan.joint, &gxj, &mut grad_z);
        fmt.scatter(&plan.shuffled, &gxs, &mut grad_z);
    }
    Ok((total, grad_z))
}

struct EncoderPass {
    classification: Vec<f64>,
    adversarial: Option<f64>,
    encoder_grads: Mlp,
    head_grads: Vec<Mlp>,
}

fn encoder_pass(
    models: &Models,
    fmt: &PackFormat,
    form: LossForm,
    lambda: f64,
    x: &Array2<f64>,
    attrs: &AttributeTable,
    plans: &[TermPlans],
) -> Result<EncoderPass> {
    let (z, cache) = models.encoder.forward(x)?;
    let (classification, head_grads, mut grad_z) = heads_loss(models, &z, attrs)?;
    let mut adversarial = None;
    if let Some(disc) = &models.discriminator {
        let (value, g) = encoder_adversarial(disc, fmt, form, &z, plans)?;
        adversarial = Some(value);
        if lambda != 0.0 {
            grad_z.scaled_add(lambda, &g);
        }
    }
    let (encoder_grads, _) = models.encoder.backward(&cache, &grad_z);
    Ok(EncoderPass {
        classification,
        adversarial,
        encoder_grads,
        head_grads,
    })
}

fn discriminator_terms(
    disc: &Mlp,
    fmt: &PackFormat,
    form: LossForm,
    z: &Array2<f64>,
    plans: &[TermPlans],
) -> Result<(DiscriminatorStats, Mlp)> {
    let mut grads = disc.zeros_like();
    let mut loss = 0.0;
    let (mut correct, mut seen) = (0usize, 0usize);
    for plan in plans {
        if plan.joint.packs() == 0 || plan.shuffled.packs() == 0 {
            continue;
        }
        let (lj, cj) = disc.forward(&fmt.build(&plan.joint, z))?;
        let (ls, cs) = disc.forward(&fmt.build(&plan.shuffled, z))?;
        let (lj, ls) = (lj.as_slice().unwrap(), ls.as_slice().unwrap());
        let (value, gj, gs) = adversarial_loss(form, false, lj, ls);
        loss += value;
        correct += lj.iter().filter(|&&l| l > 0.0).count() + ls.iter().filter(|&&l| l < 0.0).count();
        seen += lj.len() + ls.len();
        let (pj, _) = disc.backward(&cj, &column(gj));
        let (ps, _) = disc.backward(&cs, &column(gs));
        crate::nn::accumulate(&mut grads, &pj, 1.0);
        crate::nn::accumulate(&mut grads, &ps, 1.0);
    }
    let accuracy = if seen == 0 { 0.5 } else { correct as f64 / seen as f64 };
    Ok((DiscriminatorStats { loss, accuracy }, grads))
}

/// Full encoder-side objective `Σ_k CE_k + λ · adversarial` with pack plans
/// drawn from `plan_seed`, and its gradients for the encoder and heads.
/// The training loop uses the same computation with its own shuffle stream.
pub fn encoder_objective(
    models: &Models,
    config: &TrainConfig,
    x: &Array2<f64>,
    attrs: &AttributeTable,
    plan_seed: u64,
) -> Result<(f64, Mlp, Vec<Mlp>)> {
    let plans = term_plans(config.objective, attrs, config.pack_size, &mut ChaCha8Rng::seed_from_u64(plan_seed));
    let fmt = models.pack_format(config.objective, config.pack_size);
    let lambda = config.adversarial_weight;
    let pass = encoder_pass(models, &fmt, config.loss_form, lambda, x, attrs, &plans)?;
    let loss = pass.classification.iter().sum::<f64>() + lambda * pass.adversarial.unwrap_or(0.0);
    Ok((loss, pass.encoder_grads, pass.head_grads))
}

/// Discriminator objective on latents `z` with pack plans drawn from
/// `plan_seed`, and its gradient.
pub fn discriminator_objective(
    models: &Models,
    config: &TrainConfig,
    z: &Array2<f64>,
    attrs: &AttributeTable,
    plan_seed: u64,
) -> Result<(f64, Mlp)> {
    let disc = models
        .discriminator
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("objective has no discriminator".into()))?;
    let plans = term_plans(config.objective, attrs, config.pack_size, &mut ChaCha8Rng::seed_from_u64(plan_seed));
    let fmt = models.pack_format(config.objective, config.pack_size);
    let (stats, grads) = discriminator_terms(disc, &fmt, config.loss_form, z, &plans)?;
    Ok((stats.loss, grads))
}

pub struct Trainer {
    pub config: TrainConfig,
    pub models: Models,
    pub log: TrainLog,
    adam_encoder: AdamState,
    adam_heads: AdamState,
    adam_discriminator: Option<AdamState>,
    data_rng: ChaCha8Rng,
    shuffle_rng: ChaCha8Rng,
    step: usize,
    epoch: usize,
    started: Instant,
}

impl Trainer {
    pub fn new(config: TrainConfig, input_dim: usize, cardinalities: &[usize]) -> Result<Self> {
        config.validate()?;
        let models = Models::init(&config, input_dim, cardinalities, &mut rng_stream(config.seed, STREAM_INIT))?;
        Ok(Self::from_models(config, models))
    }

    pub fn from_models(config: TrainConfig, models: Models) -> Self {
        let adam_encoder = AdamState::new(config.lr_encoder, &models.encoder);
        let adam_heads = AdamState::new(config.lr_classifiers, &models.heads);
        let adam_discriminator = models
            .discriminator
            .as_ref()
            .map(|d| AdamState::new(config.lr_discriminator, d));
        Trainer {
            log: TrainLog::new(config.seed, config.hash()),
            data_rng: rng_stream(config.seed, STREAM_DATA),
            shuffle_rng: rng_stream(config.seed, STREAM_SHUFFLE),
            config,
            models,
            adam_encoder,
            adam_heads,
            adam_discriminator,
            step: 0,
            epoch: 0,
            started: Instant::now(),
        }
    }

    pub fn pack_format(&self) -> PackFormat {
        self.models.pack_format(self.config.objective, self.config.pack_size)
    }

    fn check_batch(&self, x: &Array2<f64>, attrs: &AttributeTable) -> Result<()> {
        if x.nrows() != attrs.n() {
            return Err(Error::ShapeMismatch(format!("{} inputs, {} label rows", x.nrows(), attrs.n())));
        }
        if attrs.k() != self.models.heads.len() {
            return Err(Error::LayoutMismatch(format!(
                "{} attributes for {} heads",
                attrs.k(),
                self.models.heads.len()
            )));
        }
        Ok(())
    }

    fn effective_weight(&self) -> f64 {
        if self.epoch < self.config.warmup_epochs {
            0.0
        } else {
            self.config.adversarial_weight
        }
    }

    /// One encoder update followed by `inner_classifier_steps` head updates,
    /// the first of which uses the joint gradient.
    pub fn encoder_step(&mut self, x: &Array2<f64>, attrs: &AttributeTable) -> Result<EncoderStats> {
        self.check_batch(x, attrs)?;
        let plans = term_plans(self.config.objective, attrs, self.config.pack_size, &mut self.shuffle_rng);
        let fmt = self.pack_format();
        let lambda = self.effective_weight();
        let pass = encoder_pass(&self.models, &fmt, self.config.loss_form, lambda, x, attrs, &plans)?;
        let loss = pass.classification.iter().sum::<f64>() + lambda * pass.adversarial.unwrap_or(0.0);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                step: self.step,
                context: format!("classification {:?}, adversarial {:?}", pass.classification, pass.adversarial),
            });
        }
        self.adam_encoder.update(&mut self.models.encoder, &pass.encoder_grads)?;
        self.adam_heads.update(&mut self.models.heads, &pass.head_grads)?;
        if self.config.inner_classifier_steps > 1 {
            let z = self.models.encoder.predict(x)?;
            for _ in 1..self.config.inner_classifier_steps {
                let (_, grads, _) = heads_loss(&self.models, &z, attrs)?;
                self.adam_heads.update(&mut self.models.heads, &grads)?;
            }
        }
        Ok(EncoderStats {
            classification: pass.classification,
            adversarial: pass.adversarial,
        })
    }

    /// One discriminator update on latents of `x`; encoder and heads are
    /// untouched.
    pub fn discriminator_step(&mut self, x: &Array2<f64>, attrs: &AttributeTable) -> Result<DiscriminatorStats> {
        self.check_batch(x, attrs)?;
        let z = self.models.encoder.predict(x)?;
        self.discriminator_step_on_latents(&z, attrs)
    }

    pub fn discriminator_step_on_latents(&mut self, z: &Array2<f64>, attrs: &AttributeTable) -> Result<DiscriminatorStats> {
        let (stats, grads) = self.discriminator_pass(z, attrs)?;
        let disc = self.models.discriminator.as_mut().expect("checked by discriminator_pass");
        self.adam_discriminator
            .as_mut()
            .expect("discriminator optimiser")
            .update(disc, &grads)?;
        Ok(stats)
    }

    /// Loss and accuracy of the current discriminator on fresh packs of `z`,
    /// without updating it.
    pub fn evaluate_discriminator_on_latents(&mut self, z: &Array2<f64>, attrs: &AttributeTable) -> Result<DiscriminatorStats> {
        Ok(self.discriminator_pass(z, attrs)?.0)
    }

    fn discriminator_pass(&mut self, z: &Array2<f64>, attrs: &AttributeTable) -> Result<(DiscriminatorStats, Mlp)> {
        let plans = term_plans(self.config.objective, attrs, self.config.pack_size, &mut self.shuffle_rng);
        let fmt = self.pack_format();
        let disc = self
            .models
            .discriminator
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("objective has no discriminator".into()))?;
        let (stats, grads) = discriminator_terms(disc, &fmt, self.config.loss_form, z, &plans)?;
        if !stats.loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                step: self.step,
                context: "discriminator loss".into(),
            });
        }
        Ok((stats, grads))
    }

    /// Discriminator then encoder updates on one batch, logged as one step.
    pub fn train_batch(&mut self, x: &Array2<f64>, attrs: &AttributeTable) -> Result<StepRecord> {
        let mut disc = None;
        if self.config.objective.is_adversarial() {
            for _ in 0..self.config.discriminator_steps {
                disc = Some(self.discriminator_step(x, attrs)?);
            }
        }
        let enc = self.encoder_step(x, attrs)?;
        let record = StepRecord {
            step: self.step,
            epoch: self.epoch,
            classification: enc.classification,
            adversarial: enc.adversarial,
            discriminator_loss: disc.map(|d| d.loss),
            discriminator_accuracy: disc.map(|d| d.accuracy),
            elapsed_ms: self.started.elapsed().as_secs_f64() * 1e3,
        };
        self.log.push(record.clone())?;
        self.step += 1;
        Ok(record)
    }

    pub fn run_epoch(&mut self, source: &mut dyn BatchSource) -> Result<()> {
        for (x, attrs) in source.epoch(self.config.batch, &mut self.data_rng)? {
            self.train_batch(&x, &attrs)?;
        }
        self.epoch += 1;
        Ok(())
    }

    /// Runs the configured number of epochs.
    pub fn fit(&mut self, source: &mut dyn BatchSource) -> Result<()> {
        if source.cardinalities() != self.models.cardinalities || source.input_dim() != self.models.encoder.spec.input_dim {
            return Err(Error::ShapeMismatch("data source does not match the models".into()));
        }
        for _ in 0..self.config.epochs {
            self.run_epoch(source)?;
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.step
    }
}

/// Trains a fresh model on `source` with `config`.
pub fn train(source: &mut dyn BatchSource, config: &TrainConfig) -> Result<(Models, TrainLog)> {
    let mut trainer = Trainer::new(config.clone(), source.input_dim(), &source.cardinalities())?;
    trainer.fit(source)?;
    Ok((trainer.models, trainer.log))
}

/// Accuracy of each attribute head on `(x, attrs)`, counting all rows.
pub fn accuracy(models: &Models, x: &Array2<f64>, attrs: &AttributeTable) -> Result<Vec<f64>> {
    let pred = models.predict(x)?;
    Ok((0..attrs.k())
        .map(|k| {
            let hits = pred.column(k).iter().zip(attrs.labels.column(k)).filter(|(p, l)| p == l).count();
            hits as f64 / attrs.n().max(1) as f64
        })
        .collect())
}
