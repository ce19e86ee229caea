//! `condis analytic`: closed-form linear solutions under correlation shift.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use condis::eval::{analytic_variance_sweep, sweep_svg, write_sweep_csv, Document};
use condis::gaussian::{solve, variance_explained, LinearGaussianModel};
use condis::presets::{preset, PresetKind};
use condis::Objective;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::{layered, Patch};
use crate::run_dir::RunDir;
use crate::Global;

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    /// Training correlation between the two sources.
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    /// Isotropic observation noise variance.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Run directory (default: generated under --out-dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyticConfig {
    pub rho: f64,
    pub sigma2: f64,
    pub test_rhos: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyticRow {
    pub objective: Objective,
    pub ve_train: f64,
    pub ve_uncorrelated: f64,
    /// Effective regressor `ŝ = M x`.
    pub regressor: Vec<Vec<f64>>,
    /// Encoder `z = W x`.
    pub encoder: Vec<Vec<f64>>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn fmt_matrix(m: &[Vec<f64>]) -> String {
    let inner: Vec<String> = m
        .iter()
        .map(|r| format!("[{}]", r.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(", ")))
        .collect();
    format!("[{}]", inner.join(", "))
}

pub fn run(global: &Global, args: &AnalyticArgs) -> Result<()> {
    let name = global.preset.as_deref().unwrap_or("table1");
    let p = preset(name)?;
    let PresetKind::Analytic { rho, sigma2 } = p.data else {
        anyhow::bail!("preset `{name}` is not an analytic preset");
    };
    let defaults = AnalyticConfig {
        rho,
        sigma2,
        test_rhos: (-8..=8).step_by(2).map(|i| i as f64 / 10.0).collect(),
    };
    let mut flags = Patch::default();
    flags.set("rho", args.rho).set("sigma2", args.sigma2);
    let cfg: AnalyticConfig = layered(&defaults, global.config.as_deref(), flags)?;
    let model = LinearGaussianModel::isotropic(DMatrix::identity(2, 2), cfg.rho, cfg.sigma2)?;
    let mut run = RunDir::create(&global.out_dir, args.out.as_deref(), "analytic", name, &cfg, &[], BTreeMap::new())?;
    let result = body(&mut run, &cfg, &model);
    let table = run.finish(result)?;
    println!("{:<10} {:>9} {:>16}  {:<30} W", "objective", "VE train", "VE uncorrelated", "M");
    for r in &table {
        println!(
            "{:<10} {:>8.1}% {:>15.1}%  {:<30} {}",
            r.objective.as_str(),
            100.0 * r.ve_train,
            100.0 * r.ve_uncorrelated,
            fmt_matrix(&r.regressor),
            fmt_matrix(&r.encoder)
        );
    }
    Ok(())
}

fn body(run: &mut RunDir, cfg: &AnalyticConfig, model: &LinearGaussianModel) -> Result<Vec<AnalyticRow>> {
    let mut table = Vec::new();
    let mut sweeps = Vec::new();
    for objective in Objective::ALL {
        let sol = solve(objective, model)?;
        table.push(AnalyticRow {
            objective,
            ve_train: variance_explained(&sol, model, model.source_cov())?,
            ve_uncorrelated: variance_explained(&sol, model, &DMatrix::identity(2, 2))?,
            regressor: rows(&sol.regressor()),
            encoder: rows(&sol.encoder),
        });
        sweeps.push(analytic_variance_sweep(objective.as_str(), &sol, model, &cfg.test_rhos, cfg.rho)?);
    }
    let reference = Some(table[0].ve_uncorrelated);
    let sweeps: Vec<_> = sweeps.into_iter().map(|s| s.with_reference(reference)).collect();
    let mut csv = Vec::new();
    write_sweep_csv(&sweeps, &mut csv)?;
    run.write("results.csv", csv)?;
    run.write("plot.svg", sweep_svg(&sweeps, "Variance explained under correlation shift"))?;
    run.write("report.json", Document::new("analytic", table.clone()).to_json()?)?;
    Ok(table)
}
