//! `condis mnist`: occluded 3/8 digit pairs with a validation grid search.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use condis::data::{bytes_fingerprint, load_mnist, MnistSplits};
use condis::eval::{accuracy_sweep, sweep_svg, write_sweep_csv, Document, ShiftSweepReport};
use condis::presets::{mnist_train_config, preset, run_mnist, MnistPreset, PresetKind, PresetRun};
use condis::train::{Models, SavedModel, TrainConfig};
use condis::{Error, Objective};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{layered, resolve_seeds, Patch};
use crate::run_dir::RunDir;
use crate::Global;

const IDX_NAMES: [&str; 8] = [
    "train-images.idx",
    "train-labels.idx",
    "test-images.idx",
    "test-labels.idx",
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

#[derive(Debug, Args)]
pub struct MnistArgs {
    /// Directory containing `mnist/` with the IDX files.
    #[arg(long, env = "CONDIS_DATA_ROOT", default_value = "data")]
    data_root: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    rho_train: Option<f64>,
    /// Occlusion level: fraction of pixels covered.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long = "objective")]
    objectives: Vec<Objective>,
    /// Learning rates searched per component, comma separated.
    #[arg(long, value_delimiter = ',')]
    lr_grid: Option<Vec<f64>>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batches_per_epoch: Option<usize>,
    #[arg(long)]
    n_val: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MnistConfig {
    pub preset: String,
    pub data: MnistPreset,
    pub objectives: Vec<Objective>,
    pub seeds: Vec<u64>,
    pub test_rhos: Vec<f64>,
    pub lr_grid: Vec<f64>,
    pub epochs: Option<usize>,
    #[serde(default)]
    pub train: Vec<TrainConfig>,
}

fn download_hint(root: &Path) -> String {
    format!(
        "download train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte and \
         t10k-labels-idx1-ubyte (gzipped on any MNIST mirror), gunzip them into {}, \
         then rerun with --data-root {} or CONDIS_DATA_ROOT set",
        root.join("mnist").display(),
        root.display()
    )
}

fn load(root: &Path) -> Result<(MnistSplits, BTreeMap<String, String>)> {
    let splits = match load_mnist(root) {
        Ok(s) => s,
        Err(e @ Error::MissingData(_)) => bail!("{e}\n{}", download_hint(root)),
        Err(e) => return Err(e.into()),
    };
    let mut prints = BTreeMap::new();
    for name in IDX_NAMES {
        let path = root.join("mnist").join(name);
        if path.exists() {
            let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            prints.insert(name.to_string(), bytes_fingerprint(&bytes));
        }
    }
    Ok((splits, prints))
}

/// Every learning-rate assignment to the components the objective trains.
fn candidates(base: &TrainConfig, grid: &[f64]) -> Vec<TrainConfig> {
    if grid.is_empty() {
        return vec![base.clone()];
    }
    let disc: Vec<f64> = if base.objective.is_adversarial() { grid.to_vec() } else { vec![base.lr_discriminator] };
    let mut out = Vec::new();
    for &e in grid {
        for &c in grid {
            for &d in &disc {
                out.push(TrainConfig {
                    lr_encoder: e,
                    lr_classifiers: c,
                    lr_discriminator: d,
                    ..base.clone()
                });
            }
        }
    }
    out
}

pub fn run(global: &Global, args: &MnistArgs) -> Result<()> {
    let name = global.preset.clone().unwrap_or_else(|| "mnist-3-8".into());
    let p = preset(&name)?;
    let PresetKind::Mnist(data) = p.data.clone() else {
        bail!("preset `{name}` is not an MNIST preset");
    };
    let base = MnistConfig {
        preset: name.clone(),
        data,
        objectives: p.objectives.clone(),
        seeds: p.seeds.clone(),
        test_rhos: p.test_rhos.clone(),
        lr_grid: p.lr_grid.clone(),
        epochs: None,
        train: Vec::new(),
    };
    let seeds = (args.seeds.is_some() || global.seed.is_some()).then(|| resolve_seeds(&base.seeds, args.seeds, global.seed));
    let mut data_patch = Patch::default();
    data_patch
        .set("rho_train", args.rho_train)
        .set("batches_per_epoch", args.batches_per_epoch)
        .set("n_val", args.n_val)
        .set("n_test", args.n_test);
    let mut data_value = data_patch.into_value();
    if let Some(level) = args.noise {
        data_value["occlusion"] = json!({"level": level});
    }
    let mut flags = Patch::default();
    flags
        .set("data", Some(data_value))
        .set("objectives", (!args.objectives.is_empty()).then(|| args.objectives.clone()))
        .set("seeds", seeds)
        .set("lr_grid", args.lr_grid.clone())
        .set("epochs", args.epochs);
    let mut cfg: MnistConfig = layered(&base, global.config.as_deref(), flags)?;
    if cfg.objectives.is_empty() || cfg.seeds.is_empty() {
        bail!("need at least one objective and one seed");
    }
    let matches = cfg.train.len() == cfg.objectives.len()
        && cfg.train.iter().zip(&cfg.objectives).all(|(t, &o)| t.objective == o);
    if !matches {
        cfg.train = cfg.objectives.iter().map(|&o| mnist_train_config(o, 0)).collect();
    }
    if let Some(e) = cfg.epochs {
        cfg.train.iter_mut().for_each(|t| t.epochs = e);
    }
    let (splits, prints) = load(&args.data_root)?;
    let mut run = RunDir::create(&global.out_dir, args.out.as_deref(), "mnist", &name, &cfg, &cfg.seeds, prints)?;
    let result = experiment(&mut run, &cfg, &splits);
    let sweeps = run.finish(result)?;
    print!("{:>6}", "rho");
    for s in &sweeps {
        print!(" {:>10}", s.label);
    }
    println!("   (mean accuracy, %)");
    if let Some(first) = sweeps.first() {
        for pt in &first.points {
            print!("{:>6.2}", pt.rho);
            for s in &sweeps {
                print!(" {:>10.2}", s.point(pt.rho).map_or(f64::NAN, |q| 100.0 * q.mean));
            }
            println!();
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Selection {
    objective: Objective,
    lr_encoder: f64,
    lr_classifiers: f64,
    lr_discriminator: f64,
    val_accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MnistReport {
    grid: Vec<Selection>,
    selected: Vec<Selection>,
    sweeps: Vec<ShiftSweepReport>,
}

fn selection(c: &TrainConfig, val_accuracy: f64) -> Selection {
    Selection {
        objective: c.objective,
        lr_encoder: c.lr_encoder,
        lr_classifiers: c.lr_classifiers,
        lr_discriminator: c.lr_discriminator,
        val_accuracy,
    }
}

fn experiment(run: &mut RunDir, cfg: &MnistConfig, splits: &MnistSplits) -> Result<Vec<ShiftSweepReport>> {
    let task = cfg.data.task(&splits.test);
    let mut grid = Vec::new();
    let mut selected = Vec::new();
    let mut sweeps = Vec::new();
    for (o, base) in cfg.objectives.iter().zip(&cfg.train) {
        let combos = candidates(base, &cfg.lr_grid);
        let cells: Vec<(usize, u64)> = (0..combos.len()).flat_map(|c| cfg.seeds.iter().map(move |&s| (c, s))).collect();
        let results: Vec<(usize, u64, PresetRun)> = cells
            .par_iter()
            .map(|&(c, seed)| {
                let train = TrainConfig { seed, ..combos[c].clone() };
                run_mnist(&cfg.data, splits, &train).map(|r| (c, seed, r))
            })
            .collect::<condis::Result<_>>()?;
        let mut best: Option<(usize, f64)> = None;
        for (c, combo) in combos.iter().enumerate() {
            let accs: Vec<f64> = results.iter().filter(|r| r.0 == c).map(|r| r.2.val_accuracy).collect();
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            run.event("grid_cell", json!({"objective": o, "lr_encoder": combo.lr_encoder, "lr_classifiers": combo.lr_classifiers, "lr_discriminator": combo.lr_discriminator, "val_accuracy": mean}))?;
            grid.push(selection(combo, mean));
            if best.is_none_or(|(_, b)| mean > b) {
                best = Some((c, mean));
            }
        }
        let (c, mean) = best.expect("at least one grid cell");
        selected.push(selection(&combos[c], mean));
        let mut models: Vec<(u64, Models)> = Vec::new();
        for (_, seed, r) in results.into_iter().filter(|r| r.0 == c) {
            let tag = format!("{o}-seed{seed}");
            let mut log = Vec::new();
            r.log.write_ndjson(&mut log)?;
            run.write(&format!("logs/{tag}.ndjson"), log)?;
            let train = TrainConfig { seed, ..combos[c].clone() };
            run.write(&format!("checkpoints/{tag}.json"), SavedModel::new(&r.models, &train).to_json()?)?;
            models.push((seed, r.models));
        }
        sweeps.push(accuracy_sweep(o.as_str(), &models, &task, &cfg.test_rhos, cfg.data.rho_train)?);
    }
    let reference = cfg
        .objectives
        .iter()
        .position(|&o| o == Objective::Base)
        .and_then(|i| sweeps[i].point(0.0).map(|p| p.mean));
    let sweeps: Vec<_> = sweeps.into_iter().map(|s| s.with_reference(reference)).collect();
    let mut csv = Vec::new();
    write_sweep_csv(&sweeps, &mut csv)?;
    run.write("results.csv", csv)?;
    run.write("plot.svg", sweep_svg(&sweeps, "Digit-pair accuracy under correlation shift"))?;
    let report = MnistReport { grid, selected, sweeps: sweeps.clone() };
    run.write("report.json", Document::new("mnist", report).to_json()?)?;
    Ok(sweeps)
}
