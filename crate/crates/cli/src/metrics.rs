//! `condis metrics`: disentanglement metrics of a saved model on fresh,
//! uncorrelated toy data.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use condis::data::{dataset_fingerprint, ToyDataset};
use condis::eval::metrics::DEFAULT_BINS;
use condis::eval::{Binning, Document, MetricReport, MetricSettings};
use condis::presets::{preset, PresetKind};
use condis::train::SavedModel;
use condis::Error;
use serde::{Deserialize, Serialize};

use crate::config::{layered, Patch};
use crate::run_dir::RunDir;
use crate::Global;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BinningArg {
    EqualWidth,
    EqualFrequency,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Saved model written by `condis toy` or `condis mnist`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Toy preset generating the evaluation data.
    #[arg(long, default_value = "toy-cls-K2")]
    task: String,
    /// Attribute correlation of the evaluation data.
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    /// Noise standard deviation of the evaluation data.
    #[arg(long)]
    noise: Option<f64>,
    /// Evaluation rows.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, value_enum)]
    binning: Option<BinningArg>,
    /// Permit correlated evaluation data.
    #[arg(long)]
    allow_correlated: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub checkpoint: PathBuf,
    pub task: String,
    pub k: usize,
    pub rho: f64,
    pub noise: f64,
    pub n: usize,
    pub seed: u64,
    pub settings: MetricSettings,
}

pub fn run(global: &Global, args: &MetricsArgs) -> Result<()> {
    let p = preset(&args.task)?;
    let PresetKind::ToyClassification(toy) = &p.data else {
        bail!("metrics need a toy classification task, `{}` is not one", args.task);
    };
    let defaults = MetricsConfig {
        checkpoint: args.checkpoint.clone(),
        task: args.task.clone(),
        k: toy.k,
        rho: 0.0,
        noise: toy.sigma,
        n: 10_000,
        seed: 0,
        settings: MetricSettings {
            bins: DEFAULT_BINS,
            binning: Binning::EqualWidth,
        },
    };
    let mut settings = Patch::default();
    settings.set("bins", args.bins).set(
        "binning",
        args.binning.map(|b| match b {
            BinningArg::EqualWidth => Binning::EqualWidth,
            BinningArg::EqualFrequency => Binning::EqualFrequency,
        }),
    );
    let mut flags = Patch::default();
    flags
        .set("rho", args.rho)
        .set("noise", args.noise)
        .set("n", args.n)
        .set("seed", global.seed)
        .set("settings", Some(settings.into_value()));
    let cfg: MetricsConfig = layered(&defaults, global.config.as_deref(), flags)?;
    if cfg.rho != 0.0 && !args.allow_correlated {
        bail!(
            "evaluation correlation {} would confound the metrics; pass --allow-correlated to proceed anyway",
            cfg.rho
        );
    }
    let saved = SavedModel::load(&cfg.checkpoint)?;
    let models = saved.to_models()?;
    if saved.input_dim != cfg.k || models.layout.k() != cfg.k {
        return Err(Error::SchemaMismatch(format!(
            "checkpoint expects {} inputs and {} attributes, task `{}` has {}",
            saved.input_dim,
            models.layout.k(),
            cfg.task,
            cfg.k
        ))
        .into());
    }
    let data = ToyDataset::generate(&ndarray::Array2::eye(cfg.k), cfg.noise, cfg.rho, cfg.n, cfg.seed)?;
    let prints = BTreeMap::from([("evaluation".to_string(), dataset_fingerprint(&data.x, &data.attrs))]);
    let mut run = RunDir::create(&global.out_dir, args.out.as_deref(), "metrics", &cfg.task, &cfg, &[cfg.seed], prints)?;
    let result = (|| -> Result<MetricReport> {
        let z = models.latents(&data.x)?;
        let desc = format!("{} rows of {} at rho {}", cfg.n, cfg.task, cfg.rho);
        let report = MetricReport::compute(&z, &data.attrs.labels, &models.layout.column_owners(), cfg.settings, &desc)?;
        run.write("report.json", Document::new("metrics", report.clone()).to_json()?)?;
        Ok(report)
    })();
    let report = run.finish(result)?;
    println!("MIG   {:.4}", report.mig);
    println!("SAP   {:.4}", report.sap);
    println!("TC    {:.4}", report.gaussian_total_correlation);
    println!("MI    {:.4}", report.mutual_info_score);
    Ok(())
}
