//! `condis`: experiment runner for conditional disentanglement.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

mod analytic;
mod config;
mod metrics;
mod mnist;
mod prop31;
mod run_dir;
mod toy;

#[derive(Debug, Parser)]
#[command(name = "condis", version, about = "Conditional disentanglement experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Global {
    /// Root under which run directories are created.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads for independent runs and sweep points; 0 uses every core.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// First seed; shifts the preset's seed list.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Named preset supplying the defaults.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// JSON file overriding preset fields; flags override the file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form linear solutions and their variance explained.
    Analytic(analytic::AnalyticArgs),
    /// Train and sweep on synthetic data.
    Toy(toy::ToyArgs),
    /// Train and sweep on occluded 3/8 digit pairs.
    Mnist(mnist::MnistArgs),
    /// Random search for counterexamples to the sufficiency proposition.
    Prop31(prop31::Prop31Args),
    /// Disentanglement metrics of a saved model.
    Metrics(metrics::MetricsArgs),
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(g.workers)
        .build()
        .context("building worker pool")?;
    pool.install(|| match &cli.command {
        Command::Analytic(a) => analytic::run(g, a).map(|_| ExitCode::SUCCESS),
        Command::Toy(a) => toy::run(g, a).map(|_| ExitCode::SUCCESS),
        Command::Mnist(a) => mnist::run(g, a).map(|_| ExitCode::SUCCESS),
        Command::Prop31(a) => prop31::run(g, a),
        Command::Metrics(a) => metrics::run(g, a).map(|_| ExitCode::SUCCESS),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
