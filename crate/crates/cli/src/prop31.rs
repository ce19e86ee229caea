//! `condis prop31`: search random binary joints for counterexamples.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::Args;
use condis::eval::Document;
use condis::info::{prop31_search, Prop31Thresholds};
use serde::{Deserialize, Serialize};

use crate::config::{layered, Patch};
use crate::run_dir::RunDir;
use crate::Global;

#[derive(Debug, Args)]
pub struct Prop31Args {
    /// Number of random source joints.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    trials: Option<u64>,
    /// Drop the latent independence condition and report witnesses instead.
    #[arg(long)]
    relaxed: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prop31Config {
    pub trials: usize,
    pub seed: u64,
    pub relaxed: bool,
    pub thresholds: Prop31Thresholds,
}

pub fn run(global: &Global, args: &Prop31Args) -> Result<ExitCode> {
    let defaults = Prop31Config {
        trials: 10_000,
        seed: 0,
        relaxed: false,
        thresholds: Prop31Thresholds::default(),
    };
    let mut flags = Patch::default();
    flags
        .set("trials", args.trials)
        .set("seed", global.seed)
        .set("relaxed", args.relaxed.then_some(true));
    let cfg: Prop31Config = layered(&defaults, global.config.as_deref(), flags)?;
    let mut run = RunDir::create(&global.out_dir, args.out.as_deref(), "prop31", "prop31", &cfg, &[cfg.seed], BTreeMap::new())?;
    let result = (|| -> Result<_> {
        let report = prop31_search(cfg.trials, cfg.seed, cfg.relaxed, cfg.thresholds)?;
        run.write("report.json", Document::new("prop31", report.clone()).to_json()?)?;
        Ok(report)
    })();
    let report = run.finish(result)?;
    println!(
        "{} trials, {} candidates: {} with correlated sources, {} with independent latents, {} sufficient",
        report.trials, report.candidates, report.correlated_sources, report.independent_latents, report.sufficient_latents
    );
    if cfg.relaxed {
        println!("{} relaxed witnesses", report.hits.len());
        return Ok(ExitCode::SUCCESS);
    }
    println!("{} counterexamples", report.hits.len());
    Ok(if report.hits.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
