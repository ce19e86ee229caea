//! Histogram and threshold based disentanglement scores.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 20;
const MAX_CONDITION: f64 = 1e12;
pub const METRIC_SCHEMA: &str = "condis-metrics/1";

/// Discretisation of a latent dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    /// Equal-width bins between the minimum and maximum value.
    #[default]
    EqualWidth,
    /// Bins holding equal numbers of rows by rank; tied values share a bin.
    EqualFrequency,
}

fn check_inputs(latents: &Array2<f64>, factors: &Array2<usize>) -> Result<()> {
    if latents.nrows() != factors.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{} latent rows, {} factor rows",
            latents.nrows(),
            factors.nrows()
        )));
    }
    if latents.nrows() == 0 || latents.ncols() == 0 || factors.ncols() == 0 {
        return Err(Error::InvalidArgument("empty evaluation set".into()));
    }
    if latents.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("latents contain non-finite values".into()));
    }
    Ok(())
}

/// Bin index of every value of `column`. A constant column falls into one bin.
pub fn discretize(column: ArrayView1<f64>, bins: usize, binning: Binning) -> Vec<usize> {
    let n = column.len();
    match binning {
        Binning::EqualWidth => {
            let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(hi > lo) {
                return vec![0; n];
            }
            column
                .iter()
                .map(|&v| (((v - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1))
                .collect()
        }
        Binning::EqualFrequency => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
            let mut out = vec![0; n];
            let mut first = 0;
            for (rank, &i) in order.iter().enumerate() {
                if rank > 0 && column[i] != column[order[rank - 1]] {
                    first = rank;
                }
                out[i] = first * bins / n;
            }
            out
        }
    }
}

fn entropy_of(counts: &[usize], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Plug-in entropy of a discrete sequence, in nats.
pub fn discrete_entropy(a: &[usize]) -> f64 {
    let size = a.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; size];
    for &v in a {
        counts[v] += 1;
    }
    entropy_of(&counts, a.len() as f64)
}

/// Plug-in mutual information of two discrete sequences, in nats.
pub fn discrete_mi(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "sequence lengths");
    let n = a.len() as f64;
    let na = a.iter().max().map_or(0, |m| m + 1);
    let nb = b.iter().max().map_or(0, |m| m + 1);
    let mut joint = vec![0usize; na * nb];
    let mut ca = vec![0usize; na];
    let mut cb = vec![0usize; nb];
    for (&x, &y) in a.iter().zip(b) {
        joint[x * nb + y] += 1;
        ca[x] += 1;
        cb[y] += 1;
    }
    (entropy_of(&ca, n) + entropy_of(&cb, n) - entropy_of(&joint, n)).max(0.0)
}

struct Discretized {
    latents: Vec<Vec<usize>>,
    factors: Vec<Vec<usize>>,
}

fn prepare(latents: &Array2<f64>, factors: &Array2<usize>, bins: usize, binning: Binning) -> Result<Discretized> {
    check_inputs(latents, factors)?;
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bins, got {bins}")));
    }
    Ok(Discretized {
        latents: latents.columns().into_iter().map(|c| discretize(c, bins, binning)).collect(),
        factors: factors.columns().into_iter().map(|c| c.to_vec()).collect(),
    })
}

fn top_two_gap(mut scores: Vec<f64>) -> f64 {
    scores.sort_by(|a, b| b.total_cmp(a));
    scores[0] - scores.get(1).copied().unwrap_or(0.0)
}

fn mean_over_factors(gaps: Vec<f64>, metric: &str) -> Result<f64> {
    if gaps.is_empty() {
        return Err(Error::DegenerateLatent(format!("{metric}: every factor is constant on the evaluation set")));
    }
    Ok(gaps.iter().sum::<f64>() / gaps.len() as f64)
}

/// Mutual information gap: mean over factors of the difference between the
/// two largest latent-dimension MIs, normalised by the factor entropy.
/// Constant factors are skipped.
pub fn mig(latents: &Array2<f64>, factors: &Array2<usize>, bins: usize, binning: Binning) -> Result<f64> {
    let d = prepare(latents, factors, bins, binning)?;
    let mut gaps = Vec::new();
    for (k, f) in d.factors.iter().enumerate() {
        let h = discrete_entropy(f);
        if h <= 1e-12 {
            log::warn!("MIG: factor {k} is constant and is excluded");
            continue;
        }
        let mis = d.latents.iter().map(|z| discrete_mi(z, f)).collect();
        gaps.push((top_two_gap(mis) / h).clamp(0.0, 1.0));
    }
    mean_over_factors(gaps, "MIG")
}

/// Informedness `TPR − FPR` of the best single threshold on `z`, in either
/// direction; equivalently `2·BA − 1` for the best balanced accuracy.
pub fn threshold_informedness(z: ArrayView1<f64>, labels: ArrayView1<usize>) -> f64 {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| z[a].total_cmp(&z[b]));
    let (mut tp_below, mut fp_below) = (0usize, 0usize);
    let mut best = 0.0f64;
    for (r, &i) in order.iter().enumerate() {
        if labels[i] == 1 {
            tp_below += 1;
        } else {
            fp_below += 1;
        }
        let boundary = r + 1 == order.len() || z[order[r + 1]] != z[i];
        if boundary {
            let score = tp_below as f64 / pos as f64 - fp_below as f64 / neg as f64;
            best = best.max(score.abs());
        }
    }
    best
}

/// Separated attribute predictability for binary factors: mean over factors
/// of the gap between the two most predictive latent dimensions, each scored
/// by [`threshold_informedness`].
pub fn sap(latents: &Array2<f64>, factors: &Array2<usize>) -> Result<f64> {
    check_inputs(latents, factors)?;
    let mut gaps = Vec::new();
    for (k, f) in factors.columns().into_iter().enumerate() {
        if f.iter().any(|&v| v > 1) {
            return Err(Error::Unsupported(format!("SAP needs binary factors; factor {k} is not")));
        }
        let ones = f.iter().filter(|&&v| v == 1).count();
        if ones == 0 || ones == f.len() {
            log::warn!("SAP: factor {k} is constant and is excluded");
            continue;
        }
        let scores = latents.columns().into_iter().map(|z| threshold_informedness(z, f)).collect();
        gaps.push(top_two_gap(scores));
    }
    mean_over_factors(gaps, "SAP")
}

/// `½(Σ ln Var(z_i) − ln det Cov(z))` of the empirical covariance, in nats.
pub fn gaussian_total_correlation(latents: &Array2<f64>) -> Result<f64> {
    let (n, dim) = latents.dim();
    if n <= dim {
        return Err(Error::InvalidArgument(format!("need more rows than dimensions, got {n}x{dim}")));
    }
    let mean = latents.mean_axis(ndarray::Axis(0)).expect("non-empty");
    let centred = latents - &mean;
    let cov = centred.t().dot(&centred) / (n as f64 - 1.0);
    let sd: Vec<f64> = (0..dim).map(|i| cov[(i, i)].sqrt()).collect();
    if sd.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::SingularCovariance { condition: f64::INFINITY });
    }
    let corr = DMatrix::from_fn(dim, dim, |i, j| cov[(i, j)] / (sd[i] * sd[j]));
    let eig = SymmetricEigen::new(corr).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularCovariance { condition });
    }
    Ok((-0.5 * eig.iter().map(|v| v.ln()).sum::<f64>()).max(0.0))
}

/// Mean histogram MI between each latent dimension and every factor it is
/// not assigned to (`owners[j]` is the factor of dimension `j`). Zero when
/// there is no such pair.
pub fn mutual_info_score(
    latents: &Array2<f64>,
    factors: &Array2<usize>,
    owners: &[usize],
    bins: usize,
    binning: Binning,
) -> Result<f64> {
    if owners.len() != latents.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "{} owners for {} latent dimensions",
            owners.len(),
            latents.ncols()
        )));
    }
    let d = prepare(latents, factors, bins, binning)?;
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (j, z) in d.latents.iter().enumerate() {
        for (k, f) in d.factors.iter().enumerate() {
            if owners[j] != k {
                total += discrete_mi(z, f);
                pairs += 1;
            }
        }
    }
    Ok(if pairs == 0 { 0.0 } else { total / pairs as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSettings {
    pub bins: usize,
    pub binning: Binning,
}

impl Default for MetricSettings {
    fn default() -> Self {
        MetricSettings {
            bins: DEFAULT_BINS,
            binning: Binning::EqualWidth,
        }
    }
}

/// Describes the data a metric report was computed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSet {
    pub description: String,
    pub rows: usize,
    /// Empirical correlation of the first two factors.
    pub factor_correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema: String,
    pub settings: MetricSettings,
    pub evaluation: EvaluationSet,
    pub mig: f64,
    pub sap: f64,
    pub gaussian_total_correlation: f64,
    pub mutual_info_score: f64,
}

fn factor_correlation(factors: &Array2<usize>) -> f64 {
    if factors.ncols() < 2 {
        return 0.0;
    }
    let a: Vec<f64> = factors.column(0).iter().map(|&v| v as f64).collect();
    let b: Vec<f64> = factors.column(1).iter().map(|&v| v as f64).collect();
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if va > 0.0 && vb > 0.0 {
        cov / (va * vb).sqrt()
    } else {
        0.0
    }
}

impl MetricReport {
    pub fn compute(
        latents: &Array2<f64>,
        factors: &Array2<usize>,
        owners: &[usize],
        settings: MetricSettings,
        description: &str,
    ) -> Result<Self> {
        Ok(MetricReport {
            schema: METRIC_SCHEMA.to_string(),
            settings,
            evaluation: EvaluationSet {
                description: description.to_string(),
                rows: latents.nrows(),
                factor_correlation: factor_correlation(factors),
            },
            mig: mig(latents, factors, settings.bins, settings.binning)?,
            sap: sap(latents, factors)?,
            gaussian_total_correlation: gaussian_total_correlation(latents)?,
            mutual_info_score: mutual_info_score(latents, factors, owners, settings.bins, settings.binning)?,
        })
    }
}
