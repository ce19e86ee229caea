//! Robustness under correlation shift, subgroup analysis and the
//! disentanglement metrics.

pub mod metrics;
pub mod plot;
pub mod report;
pub mod subgroup;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use metrics::{
    gaussian_total_correlation, mig, mutual_info_score, sap, Binning, MetricReport, MetricSettings,
};
pub use plot::sweep_svg;
pub use report::{read_sweep_csv, write_sweep_csv, Document, SweepCsvRow};
pub use subgroup::{confusion, subgroup_error, ConfusionMatrix, SubgroupCell, SubgroupReport};

use crate::data::{
    make_pair_batch, sample_correlated_attributes, toy_observations, AttributeTable, DigitPools,
    OcclusionParams,
};
use crate::error::{Error, Result};
use crate::gaussian::{make_correlated_covariance, LinearGaussianModel, LinearSolution};
use crate::train::Models;

/// Test data for sweep point `index` is drawn from this stream of the seed,
/// well away from the training streams.
const TEST_STREAM_BASE: u64 = 1 << 16;

pub fn test_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TEST_STREAM_BASE + index as u64);
    rng
}

/// Anything that predicts a class per attribute.
pub trait Predictor: Sync {
    fn predict(&self, x: &Array2<f64>) -> Result<Array2<usize>>;
}

impl Predictor for Models {
    fn predict(&self, x: &Array2<f64>) -> Result<Array2<usize>> {
        Models::predict(self, x)
    }
}

/// Predicts class 1 for attribute `k` iff `(W x)_k > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignReadout {
    pub weights: Array2<f64>,
}

impl Predictor for SignReadout {
    fn predict(&self, x: &Array2<f64>) -> Result<Array2<usize>> {
        if x.ncols() != self.weights.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "readout expects {} inputs, got {}",
                self.weights.ncols(),
                x.ncols()
            )));
        }
        Ok(x.dot(&self.weights.t()).mapv(|v| (v > 0.0) as usize))
    }
}

/// Always predicts the same class per attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantPredictor {
    pub classes: Vec<usize>,
}

impl Predictor for ConstantPredictor {
    fn predict(&self, x: &Array2<f64>) -> Result<Array2<usize>> {
        Ok(Array2::from_shape_fn((x.nrows(), self.classes.len()), |(_, k)| self.classes[k]))
    }
}

/// Produces labeled test sets at a requested attribute correlation.
pub trait TaskGenerator: Sync {
    fn noise_level(&self) -> f64;
    fn sample(&self, rho: f64, rng: &mut ChaCha8Rng) -> Result<(Array2<f64>, AttributeTable)>;
}

/// Binary toy classification: `x = A s + σ n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyTask {
    pub mixing: Array2<f64>,
    pub sigma: f64,
    pub n: usize,
}

impl TaskGenerator for ToyTask {
    fn noise_level(&self) -> f64 {
        self.sigma
    }

    fn sample(&self, rho: f64, rng: &mut ChaCha8Rng) -> Result<(Array2<f64>, AttributeTable)> {
        let attrs = sample_correlated_attributes(self.mixing.nrows(), rho, self.n, rng)?;
        let x = toy_observations(&attrs, &self.mixing, self.sigma, rng)?;
        Ok((x, attrs))
    }
}

/// Occluded digit pairs.
#[derive(Debug, Clone)]
pub struct PairTask {
    pub pools: DigitPools,
    pub occlusion: OcclusionParams,
    pub n: usize,
}

impl TaskGenerator for PairTask {
    fn noise_level(&self) -> f64 {
        self.occlusion.level
    }

    fn sample(&self, rho: f64, rng: &mut ChaCha8Rng) -> Result<(Array2<f64>, AttributeTable)> {
        let b = make_pair_batch(&self.pools.threes, &self.pools.eights, rho, &self.occlusion, self.n, rng)?;
        Ok((b.flat(), b.attributes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMetric {
    Accuracy,
    VarianceExplained,
}

/// One measurement: `attribute` is `None` for the mean over attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rho: f64,
    pub seed: u64,
    pub attribute: Option<usize>,
    pub value: f64,
}

/// Aggregate over seeds at one test correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub rho: f64,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub per_attribute: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSweepReport {
    pub label: String,
    pub metric: SweepMetric,
    pub train_rho: f64,
    pub noise_level: f64,
    pub seeds: Vec<u64>,
    pub points: Vec<SweepPoint>,
    pub rows: Vec<SweepRow>,
    /// Uncorrelated-test score of the Base model, for reference lines.
    pub reference: Option<f64>,
}

impl ShiftSweepReport {
    pub fn with_reference(mut self, reference: Option<f64>) -> Self {
        self.reference = reference;
        self
    }

    pub fn point(&self, rho: f64) -> Option<&SweepPoint> {
        self.points.iter().find(|p| (p.rho - rho).abs() < 1e-12)
    }

    /// Mean over attributes for one seed at one correlation.
    pub fn seed_value(&self, rho: f64, seed: u64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.attribute.is_none() && r.seed == seed && (r.rho - rho).abs() < 1e-12)
            .map(|r| r.value)
    }
}

/// Mean and 68% interval (one standard error) of `values`.
pub fn mean_ci(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, mean, mean);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    (mean, mean - se, mean + se)
}

fn check_grid(rhos: &[f64]) -> Result<()> {
    if rhos.is_empty() {
        return Err(Error::InvalidArgument("empty correlation grid".into()));
    }
    if let Some(r) = rhos.iter().find(|r| !(-1.0..=1.0).contains(*r)) {
        return Err(Error::InvalidArgument(format!("correlation {r} not in [-1, 1]")));
    }
    Ok(())
}

fn aggregate(
    label: &str,
    metric: SweepMetric,
    train_rho: f64,
    noise_level: f64,
    seeds: Vec<u64>,
    rhos: &[f64],
    mut rows: Vec<SweepRow>,
) -> ShiftSweepReport {
    rows.sort_by(|a, b| {
        a.rho
            .total_cmp(&b.rho)
            .then(a.seed.cmp(&b.seed))
            .then(a.attribute.map_or(usize::MAX, |k| k).cmp(&b.attribute.map_or(usize::MAX, |k| k)))
    });
    let mut grid = rhos.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let points = grid
        .iter()
        .map(|&rho| {
            let at: Vec<&SweepRow> = rows.iter().filter(|r| r.rho == rho).collect();
            let means: Vec<f64> = at.iter().filter(|r| r.attribute.is_none()).map(|r| r.value).collect();
            let (mean, ci_low, ci_high) = mean_ci(&means);
            let k = at.iter().filter_map(|r| r.attribute).max().map_or(0, |m| m + 1);
            let per_attribute = (0..k)
                .map(|a| {
                    let v: Vec<f64> = at.iter().filter(|r| r.attribute == Some(a)).map(|r| r.value).collect();
                    mean_ci(&v).0
                })
                .collect();
            SweepPoint {
                rho,
                mean,
                ci_low,
                ci_high,
                per_attribute,
            }
        })
        .collect();
    ShiftSweepReport {
        label: label.to_string(),
        metric,
        train_rho,
        noise_level,
        seeds,
        points,
        rows,
        reference: None,
    }
}

/// Per-attribute accuracy of `model` on `(x, attrs)`, over labeled rows.
pub fn attribute_accuracy(model: &dyn Predictor, x: &Array2<f64>, attrs: &AttributeTable) -> Result<Vec<f64>> {
    let pred = model.predict(x)?;
    if pred.dim() != attrs.labels.dim() {
        return Err(Error::ShapeMismatch(format!(
            "predictions {:?}, labels {:?}",
            pred.dim(),
            attrs.labels.dim()
        )));
    }
    Ok((0..attrs.k())
        .map(|k| {
            let (mut hit, mut seen) = (0usize, 0usize);
            for i in 0..attrs.n() {
                if attrs.mask[(i, k)] {
                    seen += 1;
                    hit += (pred[(i, k)] == attrs.labels[(i, k)]) as usize;
                }
            }
            hit as f64 / seen.max(1) as f64
        })
        .collect())
}

/// Evaluates each `(seed, model)` on fresh test data at every correlation in
/// `rhos`. Test data depends only on the seed and grid position, so models of
/// different objectives trained with the same seed see the same test sets.
pub fn accuracy_sweep<P: Predictor>(
    label: &str,
    models: &[(u64, P)],
    task: &dyn TaskGenerator,
    rhos: &[f64],
    train_rho: f64,
) -> Result<ShiftSweepReport> {
    check_grid(rhos)?;
    if models.is_empty() {
        return Err(Error::InvalidArgument("no models to evaluate".into()));
    }
    let cells: Vec<(usize, usize)> = (0..models.len()).flat_map(|m| (0..rhos.len()).map(move |r| (m, r))).collect();
    let rows = cells
        .par_iter()
        .map(|&(m, r)| {
            let (seed, model) = &models[m];
            let (x, attrs) = task.sample(rhos[r], &mut test_rng(*seed, r))?;
            let acc = attribute_accuracy(model, &x, &attrs)?;
            let mean = acc.iter().sum::<f64>() / acc.len().max(1) as f64;
            let mut out: Vec<SweepRow> = acc
                .iter()
                .enumerate()
                .map(|(k, &value)| SweepRow {
                    rho: rhos[r],
                    seed: *seed,
                    attribute: Some(k),
                    value,
                })
                .collect();
            out.push(SweepRow {
                rho: rhos[r],
                seed: *seed,
                attribute: None,
                value: mean,
            });
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let seeds = models.iter().map(|(s, _)| *s).collect();
    Ok(aggregate(label, SweepMetric::Accuracy, train_rho, task.noise_level(), seeds, rhos, rows))
}

fn psd_sqrt(c: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(c.clone());
    let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&root)
}

/// Monte-Carlo `1 − E‖s − M x‖² / Tr(C_s)` with `s ~ N(0, cs_test)` and
/// mixing and noise taken from `model`.
pub fn empirical_variance_explained(
    regressor: &DMatrix<f64>,
    model: &LinearGaussianModel,
    cs_test: &DMatrix<f64>,
    n: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    let k = model.k();
    if regressor.nrows() != k || regressor.ncols() != k || cs_test.nrows() != k || cs_test.ncols() != k {
        return Err(Error::ShapeMismatch(format!("expected {k}x{k} regressor and covariance")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let ls = psd_sqrt(cs_test);
    let ln = psd_sqrt(model.noise_cov());
    let mut err = 0.0;
    let mut u = nalgebra::DVector::zeros(k);
    let mut e = nalgebra::DVector::zeros(k);
    for _ in 0..n {
        u.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        e.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let s = &ls * &u;
        let x = model.mixing() * &s + &ln * &e;
        err += (s - regressor * x).norm_squared();
    }
    Ok(1.0 - err / n as f64 / cs_test.trace())
}

/// Empirical variance-explained sweep of a linear solution, `n` samples per
/// point and seed.
pub fn variance_sweep(
    label: &str,
    solution: &LinearSolution,
    model: &LinearGaussianModel,
    rhos: &[f64],
    train_rho: f64,
    n: usize,
    seeds: &[u64],
) -> Result<ShiftSweepReport> {
    check_grid(rhos)?;
    let m = solution.regressor();
    let cells: Vec<(u64, usize)> = seeds.iter().flat_map(|&s| (0..rhos.len()).map(move |r| (s, r))).collect();
    let rows = cells
        .par_iter()
        .map(|&(seed, r)| {
            let cs = make_correlated_covariance(rhos[r], model.k())?;
            let value = empirical_variance_explained(&m, model, &cs, n, &mut test_rng(seed, r))?;
            Ok(SweepRow {
                rho: rhos[r],
                seed,
                attribute: None,
                value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let noise = model.noise_cov()[(0, 0)];
    Ok(aggregate(label, SweepMetric::VarianceExplained, train_rho, noise, seeds.to_vec(), rhos, rows))
}

/// The closed-form counterpart of [`variance_sweep`], reported as a single
/// seed-free series.
pub fn analytic_variance_sweep(
    label: &str,
    solution: &LinearSolution,
    model: &LinearGaussianModel,
    rhos: &[f64],
    train_rho: f64,
) -> Result<ShiftSweepReport> {
    check_grid(rhos)?;
    let report = crate::gaussian::sweep_test_correlation(solution, model, rhos)?;
    let rows = report
        .ve_test_by_rho
        .iter()
        .map(|&(rho, value)| SweepRow {
            rho,
            seed: 0,
            attribute: None,
            value,
        })
        .collect();
    let noise = model.noise_cov()[(0, 0)];
    Ok(aggregate(label, SweepMetric::VarianceExplained, train_rho, noise, vec![0], rhos, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{base_solution, variance_explained};
    use ndarray::array;

    #[test]
    fn oracle_readout_is_perfect_without_noise() {
        let task = ToyTask {
            mixing: array![[1.0, 0.5], [0.2, 1.0]],
            sigma: 0.0,
            n: 500,
        };
        let inv = array![[1.0, -0.5], [-0.2, 1.0]] / (1.0 - 0.1);
        let report = accuracy_sweep(
            "oracle",
            &[(0, SignReadout { weights: inv })],
            &task,
            &[-1.0, -0.5, 0.0, 0.5, 1.0],
            0.8,
        )
        .unwrap();
        for p in &report.points {
            assert_eq!(p.mean, 1.0);
        }
    }

    #[test]
    fn constant_predictor_is_at_chance_on_perfect_correlation() {
        let task = ToyTask {
            mixing: Array2::eye(2),
            sigma: 0.5,
            n: 20_000,
        };
        let models: Vec<(u64, ConstantPredictor)> = (0..3).map(|s| (s, ConstantPredictor { classes: vec![1, 1] })).collect();
        let report = accuracy_sweep("const", &models, &task, &[1.0], 1.0).unwrap();
        for &a in &report.points[0].per_attribute {
            // 4 standard deviations of a 60k-sample binomial mean.
            assert!((a - 0.5).abs() < 4.0 * (0.25f64 / 60_000.0).sqrt(), "{a}");
        }
    }

    #[test]
    fn sweep_is_deterministic_and_sorted() {
        let task = ToyTask {
            mixing: Array2::eye(2),
            sigma: 0.8,
            n: 300,
        };
        let models: Vec<(u64, SignReadout)> = [5, 2].iter().map(|&s| (s, SignReadout { weights: Array2::eye(2) })).collect();
        let a = accuracy_sweep("x", &models, &task, &[0.5, -0.5], 0.8).unwrap();
        let b = accuracy_sweep("x", &models, &task, &[0.5, -0.5], 0.8).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.points[0].rho, -0.5);
        assert_eq!(a.rows[0].seed, 2);
        assert!(a.rows.iter().all(|r| (0.0..=1.0).contains(&r.value)));
    }

    #[test]
    fn rejects_grid_outside_unit_interval() {
        let task = ToyTask {
            mixing: Array2::eye(2),
            sigma: 0.8,
            n: 10,
        };
        let m = [(0, ConstantPredictor { classes: vec![0, 0] })];
        assert!(accuracy_sweep("x", &m, &task, &[1.5], 0.0).is_err());
    }

    #[test]
    fn infeasible_task_correlation_propagates() {
        let task = ToyTask {
            mixing: Array2::eye(3),
            sigma: 0.8,
            n: 10,
        };
        let m = [(0, ConstantPredictor { classes: vec![0, 0, 0] })];
        assert!(matches!(
            accuracy_sweep("x", &m, &task, &[-0.5], 0.0),
            Err(Error::InfeasibleCorrelation { .. })
        ));
    }

    #[test]
    fn mean_ci_single_and_many() {
        assert_eq!(mean_ci(&[0.7]), (0.7, 0.7, 0.7));
        let (m, lo, hi) = mean_ci(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((hi - m - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((m - lo - (hi - m)).abs() < 1e-12);
    }

    #[test]
    fn empirical_variance_matches_closed_form_small() {
        let model = LinearGaussianModel::isotropic(DMatrix::identity(2, 2), 0.8, 0.1).unwrap();
        let sol = base_solution(&model).unwrap();
        let cs = make_correlated_covariance(-0.8, 2).unwrap();
        let exact = variance_explained(&sol, &model, &cs).unwrap();
        let mc = empirical_variance_explained(&sol.regressor(), &model, &cs, 100_000, &mut test_rng(1, 0)).unwrap();
        assert!((exact - mc).abs() < 0.01, "{exact} vs {mc}");
    }
}
