//! `condis toy`: synthetic regression and classification under correlation
//! shift.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use condis::data::dataset_fingerprint;
use condis::eval::{accuracy_sweep, analytic_variance_sweep, sweep_svg, variance_sweep, write_sweep_csv, Document, ShiftSweepReport};
use condis::gaussian::{solve, LinearGaussianModel};
use condis::presets::{preset, run_toy, toy_train_config, PresetKind, ToyClassification};
use condis::train::{Models, SavedModel, TrainConfig};
use condis::Objective;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{layered, resolve_seeds, Patch};
use crate::run_dir::RunDir;
use crate::Global;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Reg,
    Cls,
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    #[arg(long, value_enum, default_value = "cls")]
    task: Task,
    /// Number of attributes.
    #[arg(long = "K", alias = "k")]
    k: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    rho_train: Option<f64>,
    /// Noise standard deviation for `cls`, noise variance for `reg`.
    #[arg(long)]
    noise: Option<f64>,
    /// Objectives to run (repeatable); defaults to all three.
    #[arg(long = "objective")]
    objectives: Vec<Objective>,
    /// Number of consecutive seeds, starting at --seed.
    #[arg(long)]
    seeds: Option<usize>,
    /// Overrides the epoch count of every training configuration.
    #[arg(long)]
    epochs: Option<usize>,
    /// Fraction of training rows keeping each label.
    #[arg(long)]
    label_fraction: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToyConfig {
    pub preset: String,
    pub task: Task,
    pub k: usize,
    pub rho_train: f64,
    pub noise: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub label_fraction: f64,
    /// Monte-Carlo samples per sweep point of the regression task.
    pub n_eval: usize,
    pub objectives: Vec<Objective>,
    pub seeds: Vec<u64>,
    pub test_rhos: Vec<f64>,
    pub epochs: Option<usize>,
    /// One training configuration per objective; the seed is set per run.
    #[serde(default)]
    pub train: Vec<TrainConfig>,
}

impl ToyConfig {
    fn classification(&self) -> ToyClassification {
        ToyClassification {
            k: self.k,
            sigma: self.noise,
            rho_train: self.rho_train,
            n_train: self.n_train,
            n_val: self.n_val,
            n_test: self.n_test,
            label_fraction: self.label_fraction,
        }
    }

    /// Fills missing training configurations and applies the epoch override.
    fn resolve_training(&mut self) {
        let matches = self.train.len() == self.objectives.len()
            && self.train.iter().zip(&self.objectives).all(|(t, &o)| t.objective == o);
        if !matches {
            self.train = self.objectives.iter().map(|&o| toy_train_config(o, self.k, 0)).collect();
        }
        if let Some(e) = self.epochs {
            self.train.iter_mut().for_each(|t| t.epochs = e);
        }
    }
}

fn default_preset(args: &ToyArgs) -> String {
    match (args.task, args.k) {
        (Task::Reg, _) => "toy-reg".into(),
        (Task::Cls, Some(k @ (2 | 4 | 10))) => format!("toy-cls-K{k}"),
        (Task::Cls, _) => "toy-cls-K2".into(),
    }
}

fn defaults(name: &str, task: Task, k_flag: Option<usize>) -> Result<ToyConfig> {
    let p = preset(name)?;
    let mut cfg = match (&p.data, task) {
        (PresetKind::ToyRegression { k, rho_train, sigma2, n_eval }, Task::Reg) => ToyConfig {
            preset: p.name.clone(),
            task,
            k: *k,
            rho_train: *rho_train,
            noise: *sigma2,
            n_train: 0,
            n_val: 0,
            n_test: 0,
            label_fraction: 1.0,
            n_eval: *n_eval,
            objectives: p.objectives.clone(),
            seeds: p.seeds.clone(),
            test_rhos: p.test_rhos.clone(),
            epochs: None,
            train: Vec::new(),
        },
        (PresetKind::ToyClassification(t), Task::Cls) => ToyConfig {
            preset: p.name.clone(),
            task,
            k: t.k,
            rho_train: t.rho_train,
            noise: t.sigma,
            n_train: t.n_train,
            n_val: t.n_val,
            n_test: t.n_test,
            label_fraction: t.label_fraction,
            n_eval: 0,
            objectives: p.objectives.clone(),
            seeds: p.seeds.clone(),
            test_rhos: p.test_rhos.clone(),
            epochs: None,
            train: Vec::new(),
        },
        _ => bail!("preset `{name}` does not describe a toy {task:?} task"),
    };
    if let Some(k) = k_flag.filter(|&k| k != cfg.k) {
        cfg.k = k;
        let lo = -1.0 / (k.max(2) - 1) as f64;
        cfg.test_rhos.retain(|&r| r >= lo - 1e-12);
    }
    Ok(cfg)
}

pub fn run(global: &Global, args: &ToyArgs) -> Result<()> {
    let name = global.preset.clone().unwrap_or_else(|| default_preset(args));
    let base = defaults(&name, args.task, args.k)?;
    let mut flags = Patch::default();
    let seeds = (args.seeds.is_some() || global.seed.is_some()).then(|| resolve_seeds(&base.seeds, args.seeds, global.seed));
    flags
        .set("k", args.k)
        .set("rho_train", args.rho_train)
        .set("noise", args.noise)
        .set("objectives", (!args.objectives.is_empty()).then(|| args.objectives.clone()))
        .set("seeds", seeds)
        .set("epochs", args.epochs)
        .set("label_fraction", args.label_fraction);
    let mut cfg: ToyConfig = layered(&base, global.config.as_deref(), flags)?;
    if cfg.objectives.is_empty() || cfg.seeds.is_empty() {
        bail!("need at least one objective and one seed");
    }
    match cfg.task {
        Task::Cls => {
            cfg.resolve_training();
            let data = cfg.classification();
            let mut prints = BTreeMap::new();
            for &s in &cfg.seeds {
                let (x, attrs) = data.train_set(s)?;
                prints.insert(format!("train-seed{s}"), dataset_fingerprint(&x, &attrs));
            }
            let mut run = RunDir::create(&global.out_dir, args.out.as_deref(), "toy", &name, &cfg, &cfg.seeds, prints)?;
            let result = classification(&mut run, &cfg, &data);
            let sweeps = run.finish(result)?;
            print_sweeps(&sweeps, "accuracy");
        }
        Task::Reg => {
            let mut run = RunDir::create(&global.out_dir, args.out.as_deref(), "toy", &name, &cfg, &cfg.seeds, BTreeMap::new())?;
            let result = regression(&mut run, &cfg);
            let sweeps = run.finish(result)?;
            print_sweeps(&sweeps, "variance explained");
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunSummary {
    objective: Objective,
    seed: u64,
    val_accuracy: f64,
    final_classification: Option<Vec<f64>>,
    checkpoint: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ToyReport {
    runs: Vec<RunSummary>,
    sweeps: Vec<ShiftSweepReport>,
}

fn classification(run: &mut RunDir, cfg: &ToyConfig, data: &ToyClassification) -> Result<Vec<ShiftSweepReport>> {
    let cells: Vec<(usize, u64)> = (0..cfg.objectives.len())
        .flat_map(|o| cfg.seeds.iter().map(move |&s| (o, s)))
        .collect();
    let trained = cells
        .par_iter()
        .map(|&(o, seed)| {
            let train = TrainConfig { seed, ..cfg.train[o].clone() };
            let out = run_toy(data, &train)?;
            Ok((o, seed, train, out))
        })
        .collect::<condis::Result<Vec<_>>>()?;
    let mut runs = Vec::new();
    let mut per_objective: Vec<Vec<(u64, Models)>> = vec![Vec::new(); cfg.objectives.len()];
    for (o, seed, train, out) in trained {
        let tag = format!("{}-seed{seed}", cfg.objectives[o]);
        let mut log = Vec::new();
        out.log.write_ndjson(&mut log)?;
        run.write(&format!("logs/{tag}.ndjson"), log)?;
        let checkpoint = format!("checkpoints/{tag}.json");
        run.write(&checkpoint, SavedModel::new(&out.models, &train).to_json()?)?;
        run.event("trained", json!({"objective": cfg.objectives[o], "seed": seed, "val_accuracy": out.val_accuracy}))?;
        runs.push(RunSummary {
            objective: cfg.objectives[o],
            seed,
            val_accuracy: out.val_accuracy,
            final_classification: out.log.final_classification().map(<[f64]>::to_vec),
            checkpoint,
        });
        per_objective[o].push((seed, out.models));
    }
    let task = data.task();
    let mut sweeps = cfg
        .objectives
        .iter()
        .zip(&per_objective)
        .map(|(o, models)| accuracy_sweep(o.as_str(), models, &task, &cfg.test_rhos, cfg.rho_train))
        .collect::<condis::Result<Vec<_>>>()?;
    let reference = reference(cfg, &sweeps);
    sweeps = sweeps.into_iter().map(|s| s.with_reference(reference)).collect();
    emit(run, "Accuracy under correlation shift", ToyReport { runs, sweeps: sweeps.clone() })?;
    Ok(sweeps)
}

/// Base's score at zero test correlation, when Base ran and the grid has 0.
fn reference(cfg: &ToyConfig, sweeps: &[ShiftSweepReport]) -> Option<f64> {
    let i = cfg.objectives.iter().position(|&o| o == Objective::Base)?;
    sweeps[i].point(0.0).map(|p| p.mean)
}

fn regression(run: &mut RunDir, cfg: &ToyConfig) -> Result<Vec<ShiftSweepReport>> {
    let model = LinearGaussianModel::isotropic(DMatrix::identity(cfg.k, cfg.k), cfg.rho_train, cfg.noise)?;
    let mut objectives = Vec::new();
    let mut sweeps = Vec::new();
    let mut exact = Vec::new();
    for &o in &cfg.objectives {
        if o == Objective::BaseMi && cfg.k != 2 {
            log::warn!("skipping base+mi: the closed form covers two attributes only");
            continue;
        }
        let sol = solve(o, &model)?;
        sweeps.push(variance_sweep(o.as_str(), &sol, &model, &cfg.test_rhos, cfg.rho_train, cfg.n_eval, &cfg.seeds)?);
        exact.push(analytic_variance_sweep(&format!("{o} closed form"), &sol, &model, &cfg.test_rhos, cfg.rho_train)?);
        objectives.push(o);
    }
    let kept = ToyConfig { objectives, ..cfg.clone() };
    let reference = reference(&kept, &exact);
    let sweeps: Vec<_> = sweeps.into_iter().map(|s| s.with_reference(reference)).collect();
    let exact: Vec<_> = exact.into_iter().map(|s| s.with_reference(reference)).collect();
    let mut csv = Vec::new();
    write_sweep_csv(&[sweeps.clone(), exact.clone()].concat(), &mut csv)?;
    run.write("results.csv", csv)?;
    run.write("plot.svg", sweep_svg(&sweeps, "Variance explained under correlation shift"))?;
    let body = ToyReport {
        runs: Vec::new(),
        sweeps: [sweeps.clone(), exact].concat(),
    };
    run.write("report.json", Document::new("toy", body).to_json()?)?;
    Ok(sweeps)
}

fn emit(run: &mut RunDir, title: &str, report: ToyReport) -> Result<()> {
    let mut csv = Vec::new();
    write_sweep_csv(&report.sweeps, &mut csv)?;
    run.write("results.csv", csv)?;
    run.write("plot.svg", sweep_svg(&report.sweeps, title))?;
    run.write("report.json", Document::new("toy", report).to_json()?)?;
    Ok(())
}

fn print_sweeps(sweeps: &[ShiftSweepReport], metric: &str) {
    print!("{:>6}", "rho");
    for s in sweeps {
        print!(" {:>18}", s.label);
    }
    println!("   (mean {metric}, %)");
    let Some(first) = sweeps.first() else { return };
    for p in &first.points {
        print!("{:>6.2}", p.rho);
        for s in sweeps {
            match s.point(p.rho) {
                Some(q) => print!(" {:>18.2}", 100.0 * q.mean),
                None => print!(" {:>18}", "-"),
            }
        }
        println!();
    }
}
