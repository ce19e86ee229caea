//! Python bindings: closed-form solutions, discrete information theory, toy
//! training and disentanglement metrics.

use std::path::PathBuf;

use condis::data::ToyDataset;
use condis::eval::{Binning, MetricReport, MetricSettings};
use condis::gaussian::{solve, variance_explained, make_correlated_covariance, LinearGaussianModel, LinearSolution};
use condis::info::{prop31_search, DiscreteJoint, Prop31Thresholds};
use condis::presets::{preset, run_toy, PresetKind, PRESET_NAMES};
use condis::train::{accuracy, Models, SavedModel, TrainLog};
use condis::{Error, Objective};
use nalgebra::DMatrix;
use ndarray::Array2;
use pyo3::exceptions::{PyFileNotFoundError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: Error) -> PyErr {
    match e {
        Error::MissingData(_) => PyFileNotFoundError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn objective(name: &str) -> PyResult<Objective> {
    name.parse().map_err(err)
}

fn array(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect()).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn rows<T: Clone>(a: &Array2<T>) -> Vec<Vec<T>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Serializable value as plain Python objects, via the `json` module.
fn to_python<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Linear Gaussian model `x = A s + n` with equicorrelated sources and
/// isotropic noise.
#[pyclass(name = "GaussianModel", frozen)]
struct PyGaussianModel {
    inner: LinearGaussianModel,
}

#[pymethods]
impl PyGaussianModel {
    #[new]
    fn new(mixing: Vec<Vec<f64>>, rho: f64, sigma2: f64) -> PyResult<Self> {
        let a = array(mixing)?;
        let m = DMatrix::from_row_slice(a.nrows(), a.ncols(), a.as_slice().expect("standard layout"));
        Ok(PyGaussianModel {
            inner: LinearGaussianModel::isotropic(m, rho, sigma2).map_err(err)?,
        })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    /// Closed-form optimum of `objective` ("base", "base+mi" or "base+cmi").
    fn solve(&self, objective: &str) -> PyResult<PySolution> {
        Ok(PySolution {
            inner: solve(self::objective(objective)?, &self.inner).map_err(err)?,
        })
    }
}

#[pyclass(name = "Solution", frozen)]
struct PySolution {
    inner: LinearSolution,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn objective(&self) -> &'static str {
        self.inner.objective.as_str()
    }

    #[getter]
    fn encoder(&self) -> Vec<Vec<f64>> {
        matrix_rows(&self.inner.encoder)
    }

    #[getter]
    fn readout(&self) -> Vec<f64> {
        self.inner.readout.iter().copied().collect()
    }

    /// Effective regressor `M` with `ŝ = M x`.
    #[getter]
    fn regressor(&self) -> Vec<Vec<f64>> {
        matrix_rows(&self.inner.regressor())
    }

    /// Fraction of source variance explained at test correlation `rho`.
    fn variance_explained(&self, model: &PyGaussianModel, rho: f64) -> PyResult<f64> {
        let cs = make_correlated_covariance(rho, model.inner.k()).map_err(err)?;
        variance_explained(&self.inner, &model.inner, &cs).map_err(err)
    }
}

/// Dense joint distribution over named discrete variables; the last
/// variable varies fastest in `probs`.
#[pyclass(name = "Joint", frozen)]
struct PyJoint {
    inner: DiscreteJoint,
}

#[pymethods]
impl PyJoint {
    #[new]
    fn new(names: Vec<String>, cards: Vec<usize>, probs: Vec<f64>) -> PyResult<Self> {
        Ok(PyJoint {
            inner: DiscreteJoint::new(names, cards, probs).map_err(err)?,
        })
    }

    /// A joint drawn from the flat Dirichlet distribution.
    #[staticmethod]
    #[pyo3(signature = (names, cards, seed=0))]
    fn dirichlet(names: Vec<String>, cards: Vec<usize>, seed: u64) -> PyResult<Self> {
        use rand::SeedableRng;
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Ok(PyJoint {
            inner: DiscreteJoint::random_dirichlet(&names, &cards, &mut rng).map_err(err)?,
        })
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.inner.probs().to_vec()
    }

    fn entropy(&self, vars: Vec<String>) -> PyResult<f64> {
        self.inner.entropy(&strs(&vars)).map_err(err)
    }

    fn mutual_information(&self, a: Vec<String>, b: Vec<String>) -> PyResult<f64> {
        self.inner.mutual_information(&strs(&a), &strs(&b)).map_err(err)
    }

    fn conditional_mi(&self, a: Vec<String>, b: Vec<String>, cond: Vec<String>) -> PyResult<f64> {
        self.inner.conditional_mi(&strs(&a), &strs(&b), &strs(&cond)).map_err(err)
    }

    fn interaction_information(&self, vars: Vec<String>) -> PyResult<f64> {
        self.inner.interaction_information(&strs(&vars)).map_err(err)
    }
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

/// Encoder, heads and optional discriminator of a trained model.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    saved: SavedModel,
    models: Models,
    log: Option<TrainLog>,
    val_accuracy: Option<f64>,
}

#[pymethods]
impl PyModel {
    /// Trains one objective on a toy classification preset.
    #[staticmethod]
    #[pyo3(signature = (preset_name="toy-cls-K2", objective="base+cmi", seed=0, epochs=None))]
    fn train_toy(py: Python<'_>, preset_name: &str, objective: &str, seed: u64, epochs: Option<usize>) -> PyResult<Self> {
        let p = preset(preset_name).map_err(err)?;
        let PresetKind::ToyClassification(data) = &p.data else {
            return Err(PyValueError::new_err(format!("`{preset_name}` is not a toy classification preset")));
        };
        let mut config = p.train_config(self::objective(objective)?, seed).expect("toy presets carry training configs");
        if let Some(e) = epochs {
            config.epochs = e;
        }
        let run = py.detach(|| run_toy(data, &config)).map_err(err)?;
        Ok(PyModel {
            saved: SavedModel::new(&run.models, &config),
            models: run.models,
            log: Some(run.log),
            val_accuracy: Some(run.val_accuracy),
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let saved = SavedModel::load(&path).map_err(err)?;
        let models = saved.to_models().map_err(err)?;
        Ok(PyModel {
            saved,
            models,
            log: None,
            val_accuracy: None,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.saved.save(&path).map_err(err)
    }

    #[getter]
    fn objective(&self) -> &'static str {
        self.saved.config.objective.as_str()
    }

    #[getter]
    fn val_accuracy(&self) -> Option<f64> {
        self.val_accuracy
    }

    #[getter]
    fn column_owners(&self) -> Vec<usize> {
        self.models.layout.column_owners()
    }

    fn latents(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.models.latents(&array(x)?).map_err(err)?))
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<usize>>> {
        Ok(rows(&self.models.predict(&array(x)?).map_err(err)?))
    }

    /// Per-attribute accuracy on binary labels.
    fn accuracy(&self, x: Vec<Vec<f64>>, labels: Vec<Vec<usize>>) -> PyResult<Vec<f64>> {
        let (x, attrs) = toy_pair(x, labels)?;
        accuracy(&self.models, &x, &attrs).map_err(err)
    }

    /// Training records as a list of dicts; empty for loaded models.
    fn log<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let records = self.log.as_ref().map(|l| l.records.clone()).unwrap_or_default();
        to_python(py, &records)
    }
}

fn labels_array(labels: Vec<Vec<usize>>) -> PyResult<Array2<usize>> {
    let n = labels.len();
    let k = labels.first().map_or(0, Vec::len);
    if labels.iter().any(|r| r.len() != k) {
        return Err(PyValueError::new_err("label rows have different lengths"));
    }
    Array2::from_shape_vec((n, k), labels.into_iter().flatten().collect()).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn toy_pair(x: Vec<Vec<f64>>, labels: Vec<Vec<usize>>) -> PyResult<(Array2<f64>, condis::data::AttributeTable)> {
    let attrs = condis::data::AttributeTable::binary(labels_array(labels)?).map_err(err)?;
    Ok((array(x)?, attrs))
}

type ToyTable = (Vec<Vec<f64>>, Vec<Vec<usize>>);

/// Toy observations `x = s + σ n` with `k` binary attributes at correlation
/// `rho`; returns `(x, labels)`.
#[pyfunction]
#[pyo3(signature = (k, sigma, rho, n, seed=0))]
fn toy_dataset(k: usize, sigma: f64, rho: f64, n: usize, seed: u64) -> PyResult<ToyTable> {
    let d = ToyDataset::generate(&Array2::eye(k), sigma, rho, n, seed).map_err(err)?;
    Ok((rows(&d.x), rows(&d.attrs.labels)))
}

/// MIG, SAP, Gaussian total correlation and the mutual-information score.
#[pyfunction]
#[pyo3(signature = (latents, factors, owners=None, bins=20, binning="equal_width"))]
fn metrics<'py>(
    py: Python<'py>,
    latents: Vec<Vec<f64>>,
    factors: Vec<Vec<usize>>,
    owners: Option<Vec<usize>>,
    bins: usize,
    binning: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let z = array(latents)?;
    let f = labels_array(factors)?;
    let owners = owners.unwrap_or_else(|| (0..z.ncols()).map(|j| j.min(f.ncols().saturating_sub(1))).collect());
    let binning = match binning {
        "equal_width" => Binning::EqualWidth,
        "equal_frequency" => Binning::EqualFrequency,
        other => return Err(PyValueError::new_err(format!("unknown binning `{other}`"))),
    };
    let report = MetricReport::compute(&z, &f, &owners, MetricSettings { bins, binning }, "python").map_err(err)?;
    to_python(py, &report)
}

/// Random search for joints contradicting the sufficiency proposition.
#[pyfunction]
#[pyo3(signature = (trials, seed=0, relaxed=false))]
fn prop31<'py>(py: Python<'py>, trials: usize, seed: u64, relaxed: bool) -> PyResult<Bound<'py, PyAny>> {
    let report = py
        .detach(|| prop31_search(trials, seed, relaxed, Prop31Thresholds::default()))
        .map_err(err)?;
    to_python(py, &report)
}

#[pyfunction]
fn preset_names() -> Vec<&'static str> {
    PRESET_NAMES.to_vec()
}

#[pymodule]
fn condis_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGaussianModel>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyJoint>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(toy_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(prop31, m)?)?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    Ok(())
}
