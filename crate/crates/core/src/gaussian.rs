//! Closed-form analysis of the linear-Gaussian disentanglement problem
//! `x = A s + n` with `s ~ N(0, C_s)` and `n ~ N(0, C_n)`.
//!
//! Three linear solutions are available, one per [`Objective`]:
//!
//! * [`base_solution`]: the posterior mean `W = C_s Aᵀ C_x⁻¹`, unit readout.
//! * [`mi_constrained_solution`]: for two attributes, whiten `x`, rotate, and
//!   read each coordinate out by scalar least squares. The latent covariance
//!   is diagonal, so the latent subspaces are independent.
//! * [`cmi_constrained_solution`]: `W = A⁻¹` with per-subspace least-squares
//!   readout. Its error depends only on the noise, never on `C_s`.
//!
//! All information quantities are in nats.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Objective;

/// Condition number above which a matrix is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGaussianModel {
    mixing: DMatrix<f64>,
    source_cov: DMatrix<f64>,
    noise_cov: DMatrix<f64>,
}

impl LinearGaussianModel {
    pub fn new(
        mixing: DMatrix<f64>,
        source_cov: DMatrix<f64>,
        noise_cov: DMatrix<f64>,
    ) -> Result<Self> {
        let k = mixing.nrows();
        if k == 0 || !mixing.is_square() {
            return Err(Error::ShapeMismatch(format!(
                "mixing matrix must be square and non-empty, got {}x{}",
                mixing.nrows(),
                mixing.ncols()
            )));
        }
        check_covariance("source covariance", &source_cov, k)?;
        check_covariance("noise covariance", &noise_cov, k)?;
        Ok(LinearGaussianModel {
            mixing,
            source_cov,
            noise_cov,
        })
    }

    /// `A`, equicorrelated unit-variance sources and isotropic noise `σ² I`.
    pub fn isotropic(mixing: DMatrix<f64>, rho: f64, sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) {
            return Err(Error::InvalidArgument(format!("noise variance {sigma2} < 0")));
        }
        let k = mixing.nrows();
        let cs = make_correlated_covariance(rho, k)?;
        Self::new(mixing, cs, DMatrix::identity(k, k) * sigma2)
    }

    pub fn k(&self) -> usize {
        self.mixing.nrows()
    }

    pub fn mixing(&self) -> &DMatrix<f64> {
        &self.mixing
    }

    pub fn source_cov(&self) -> &DMatrix<f64> {
        &self.source_cov
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    /// `C_x = A C_s Aᵀ + C_n`.
    pub fn observation_cov(&self) -> DMatrix<f64> {
        &self.mixing * &self.source_cov * self.mixing.transpose() + &self.noise_cov
    }

    /// Same mixing and noise, different source covariance.
    pub fn with_source_cov(&self, source_cov: DMatrix<f64>) -> Result<Self> {
        Self::new(self.mixing.clone(), source_cov, self.noise_cov.clone())
    }
}

fn check_covariance(what: &str, c: &DMatrix<f64>, k: usize) -> Result<()> {
    if c.nrows() != k || c.ncols() != k {
        return Err(Error::ShapeMismatch(format!(
            "{what} must be {k}x{k}, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{what} has non-finite entries")));
    }
    for i in 0..k {
        for j in 0..i {
            if (c[(i, j)] - c[(j, i)]).abs() > SYMMETRY_TOL {
                return Err(Error::InvalidArgument(format!("{what} is not symmetric")));
            }
        }
    }
    let min_eig = SymmetricEigen::new(c.clone()).eigenvalues.min();
    if min_eig < -PSD_TOL {
        return Err(Error::InvalidArgument(format!(
            "{what} is not positive semidefinite (min eigenvalue {min_eig:.3e})"
        )));
    }
    Ok(())
}

/// Unit-diagonal `k x k` matrix with every off-diagonal entry equal to `rho`.
pub fn make_correlated_covariance(rho: f64, k: usize) -> Result<DMatrix<f64>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 attributes, got {k}")));
    }
    let lower = -1.0 / (k as f64 - 1.0);
    if !(rho <= 1.0) || rho < lower {
        return Err(Error::InfeasibleCorrelation {
            rho,
            k,
            reason: format!("equicorrelation is PSD only for rho in [{lower:.4}, 1]"),
        });
    }
    Ok(DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { rho }))
}

/// A linear encoder `z = W x` with scalar readouts `ŝ_k = r_k z_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSolution {
    pub encoder: DMatrix<f64>,
    pub readout: DVector<f64>,
    pub objective: Objective,
    /// Rotation angle applied after whitening (MI-constrained solution only).
    pub rotation: Option<f64>,
}

impl LinearSolution {
    /// Effective regressor `M = diag(r) W`, so that `ŝ = M x`.
    pub fn regressor(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.readout) * &self.encoder
    }
}

/// Variance explained on training data and on a set of shifted test correlations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub objective: Objective,
    pub ve_train: f64,
    pub ve_test_by_rho: Vec<(f64, f64)>,
}

fn spectrum(c: &DMatrix<f64>) -> DVector<f64> {
    SymmetricEigen::new(c.clone()).eigenvalues
}

fn symmetric_condition(c: &DMatrix<f64>) -> f64 {
    let eig = spectrum(c);
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn general_condition(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let (lo, hi) = (sv.min(), sv.max());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn invert_covariance(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let condition = symmetric_condition(c);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularCovariance { condition });
    }
    c.clone()
        .try_inverse()
        .ok_or(Error::SingularCovariance { condition })
}

/// Least-squares scalar readout of each latent coordinate:
/// `r_k = Cov(s_k, z_k) / Var(z_k)` under `model`.
fn least_squares_readout(encoder: &DMatrix<f64>, model: &LinearGaussianModel) -> DVector<f64> {
    let cov_sz = model.source_cov() * model.mixing().transpose() * encoder.transpose();
    let cov_z = encoder * model.observation_cov() * encoder.transpose();
    DVector::from_fn(encoder.nrows(), |k, _| {
        if cov_z[(k, k)] > 0.0 {
            cov_sz[(k, k)] / cov_z[(k, k)]
        } else {
            0.0
        }
    })
}

/// Supervised least squares: the posterior mean `E[s | x] = C_s Aᵀ C_x⁻¹ x`.
pub fn base_solution(model: &LinearGaussianModel) -> Result<LinearSolution> {
    let cx_inv = invert_covariance(&model.observation_cov())?;
    let encoder = model.source_cov() * model.mixing().transpose() * cx_inv;
    let k = model.k();
    Ok(LinearSolution {
        encoder,
        readout: DVector::from_element(k, 1.0),
        objective: Objective::Base,
        rotation: None,
    })
}

/// PCA whitening of a 2x2 covariance. The rows are `(cos θ, sin θ)` and
/// `(sin θ, -cos θ)` scaled by the inverse root of their variances, with
/// `θ ∈ [-π/4, π/4]` so that rotation angle 0 keeps coordinate 1 near axis 1.
fn whitener_2d(cx: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let condition = symmetric_condition(cx);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularCovariance { condition });
    }
    let (a, b, c) = (cx[(0, 0)], cx[(0, 1)], cx[(1, 1)]);
    let theta = if (a - c).abs() <= 1e-15 * (a + c) {
        if b == 0.0 {
            0.0
        } else {
            std::f64::consts::FRAC_PI_4.copysign(b)
        }
    } else {
        0.5 * (2.0 * b / (a - c)).atan()
    };
    let (sin, cos) = theta.sin_cos();
    let basis = DMatrix::from_row_slice(2, 2, &[cos, sin, sin, -cos]);
    let var = &basis * cx * basis.transpose();
    let scale = DMatrix::from_diagonal(&DVector::from_vec(vec![
        var[(0, 0)].sqrt().recip(),
        var[(1, 1)].sqrt().recip(),
    ]));
    Ok(scale * basis)
}

fn rotation_2d(phi: f64) -> DMatrix<f64> {
    let (sin, cos) = phi.sin_cos();
    DMatrix::from_row_slice(2, 2, &[cos, -sin, sin, cos])
}

fn wrap_half_turn(phi: f64) -> f64 {
    use std::f64::consts::{FRAC_PI_2, PI};
    let wrapped = (phi + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2;
    if wrapped >= FRAC_PI_2 {
        wrapped - PI
    } else {
        wrapped
    }
}

const PHI_GRID: usize = 3600;
const PHI_TOL: f64 = 1e-10;
const TIE_TOL: f64 = 1e-12;

/// Best variance explained on the training model under the constraint that
/// `Cov(z)` is diagonal (two attributes only).
///
/// The angle is found by a grid scan over `[-π/2, π/2)` refined with
/// golden-section search; among equally good angles the one with the
/// smallest magnitude wins.
pub fn mi_constrained_solution(model: &LinearGaussianModel) -> Result<LinearSolution> {
    if model.k() != 2 {
        return Err(Error::Unsupported(format!(
            "closed-form MI-constrained solution needs 2 attributes, got {}; \
             train the adversarial Base+MI objective instead",
            model.k()
        )));
    }
    let whitener = whitener_2d(&model.observation_cov())?;
    let candidate = |phi: f64| -> LinearSolution {
        let encoder = rotation_2d(phi) * &whitener;
        let readout = least_squares_readout(&encoder, model);
        LinearSolution {
            encoder,
            readout,
            objective: Objective::BaseMi,
            rotation: Some(phi),
        }
    };
    let score = |phi: f64| -> f64 {
        let sol = candidate(phi);
        variance_explained_unchecked(&sol.regressor(), model, model.source_cov())
    };

    let step = std::f64::consts::PI / PHI_GRID as f64;
    let grid: Vec<(f64, f64)> = (0..PHI_GRID)
        .map(|i| {
            let phi = -std::f64::consts::FRAC_PI_2 + i as f64 * step;
            (phi, score(phi))
        })
        .collect();
    let best = grid.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);

    // Every grid point within tolerance of the best is refined; ties are
    // broken by the smallest |φ| after refinement.
    let mut refined: Vec<(f64, f64)> = Vec::new();
    for (i, &(phi, v)) in grid.iter().enumerate() {
        let prev = grid[(i + PHI_GRID - 1) % PHI_GRID].1;
        let next = grid[(i + 1) % PHI_GRID].1;
        if v >= prev && v >= next && v >= best - 1e-6 {
            let (p, pv) = golden_max(&score, phi - step, phi + step);
            refined.push((wrap_half_turn(p), pv));
        }
    }
    let top = refined.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    let phi = refined
        .iter()
        .filter(|&&(_, v)| v >= top - TIE_TOL)
        .map(|&(p, _)| p)
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(0.0);
    Ok(candidate(phi))
}

fn golden_max(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > PHI_TOL {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// The generative inverse `W = A⁻¹` with per-subspace least-squares readout.
pub fn cmi_constrained_solution(model: &LinearGaussianModel) -> Result<LinearSolution> {
    let condition = general_condition(model.mixing());
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularMixing { condition });
    }
    let encoder = model
        .mixing()
        .clone()
        .try_inverse()
        .ok_or(Error::SingularMixing { condition })?;
    let readout = least_squares_readout(&encoder, model);
    Ok(LinearSolution {
        encoder,
        readout,
        objective: Objective::BaseCmi,
        rotation: None,
    })
}

pub fn solve(objective: Objective, model: &LinearGaussianModel) -> Result<LinearSolution> {
    match objective {
        Objective::Base => base_solution(model),
        Objective::BaseMi => mi_constrained_solution(model),
        Objective::BaseCmi => cmi_constrained_solution(model),
    }
}

/// Closed-form `E‖s − M x‖²` when sources have covariance `cs`.
pub fn expected_squared_error(
    regressor: &DMatrix<f64>,
    model: &LinearGaussianModel,
    cs: &DMatrix<f64>,
) -> f64 {
    let k = model.k();
    let residual = DMatrix::identity(k, k) - regressor * model.mixing();
    let signal = (&residual * cs * residual.transpose()).trace();
    let noise = (regressor * model.noise_cov() * regressor.transpose()).trace();
    signal + noise
}

fn variance_explained_unchecked(
    regressor: &DMatrix<f64>,
    model: &LinearGaussianModel,
    cs: &DMatrix<f64>,
) -> f64 {
    1.0 - expected_squared_error(regressor, model, cs) / cs.trace()
}

/// Fraction of source variance explained by the solution when the test
/// sources have covariance `cs_test` (mixing and noise as in `model_train`).
pub fn variance_explained(
    sol: &LinearSolution,
    model_train: &LinearGaussianModel,
    cs_test: &DMatrix<f64>,
) -> Result<f64> {
    let k = model_train.k();
    if sol.encoder.nrows() != k || sol.encoder.ncols() != k || sol.readout.len() != k {
        return Err(Error::ShapeMismatch(format!(
            "solution is {}x{} with {} readouts, model has {k} attributes",
            sol.encoder.nrows(),
            sol.encoder.ncols(),
            sol.readout.len()
        )));
    }
    check_covariance("test source covariance", cs_test, k)?;
    Ok(variance_explained_unchecked(&sol.regressor(), model_train, cs_test))
}

pub fn sweep_test_correlation(
    sol: &LinearSolution,
    model: &LinearGaussianModel,
    rhos: &[f64],
) -> Result<VarianceReport> {
    let ve_train = variance_explained(sol, model, model.source_cov())?;
    let ve_test_by_rho = rhos
        .iter()
        .map(|&rho| {
            let cs = make_correlated_covariance(rho, model.k())?;
            Ok((rho, variance_explained(sol, model, &cs)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VarianceReport {
        objective: sol.objective,
        ve_train,
        ve_test_by_rho,
    })
}

fn check_indices(c: &DMatrix<f64>, sets: &[&[usize]]) -> Result<()> {
    let mut seen = vec![false; c.nrows()];
    for set in sets {
        if set.is_empty() {
            return Err(Error::InvalidArgument("empty index set".into()));
        }
        for &i in *set {
            if i >= c.nrows() {
                return Err(Error::ShapeMismatch(format!(
                    "index {i} out of range for {}x{} covariance",
                    c.nrows(),
                    c.ncols()
                )));
            }
            if seen[i] {
                return Err(Error::OverlappingSubsets(i.to_string()));
            }
            seen[i] = true;
        }
    }
    Ok(())
}

fn block(c: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| c[(rows[i], cols[j])])
}

fn log_det_psd(c: &DMatrix<f64>) -> Result<f64> {
    let eig = spectrum(c);
    let (lo, hi) = (eig.min(), eig.max());
    let condition = if lo <= 0.0 { f64::INFINITY } else { hi / lo };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularCovariance { condition });
    }
    Ok(eig.iter().map(|v| v.ln()).sum())
}

fn mi_from_blocks(c: &DMatrix<f64>, a: &[usize], b: &[usize]) -> Result<f64> {
    let joint: Vec<usize> = a.iter().chain(b).copied().collect();
    let mi = 0.5
        * (log_det_psd(&block(c, a, a))? + log_det_psd(&block(c, b, b))?
            - log_det_psd(&block(c, &joint, &joint))?);
    Ok(mi.max(0.0))
}

/// Mutual information between two disjoint blocks of a Gaussian vector.
pub fn gaussian_mi(c: &DMatrix<f64>, a: &[usize], b: &[usize]) -> Result<f64> {
    check_indices(c, &[a, b])?;
    mi_from_blocks(c, a, b)
}

/// `I(a; b | cond)` for a Gaussian vector, via the Schur complement of the
/// conditioning block.
pub fn gaussian_cmi(c: &DMatrix<f64>, a: &[usize], b: &[usize], cond: &[usize]) -> Result<f64> {
    check_indices(c, &[a, b, cond])?;
    let ab: Vec<usize> = a.iter().chain(b).copied().collect();
    let c_cc = block(c, cond, cond);
    let c_cc_inv = invert_covariance(&c_cc)?;
    let c_abc = block(c, &ab, cond);
    let conditional = block(c, &ab, &ab) - &c_abc * c_cc_inv * c_abc.transpose();
    let conditional = (&conditional + conditional.transpose()) * 0.5;
    let a_local: Vec<usize> = (0..a.len()).collect();
    let b_local: Vec<usize> = (a.len()..ab.len()).collect();
    mi_from_blocks(&conditional, &a_local, &b_local)
}

/// Joint covariance of `(z_1..z_K, s_1..s_K)` for `z = W x` under `model`.
pub fn latent_source_covariance(sol: &LinearSolution, model: &LinearGaussianModel) -> DMatrix<f64> {
    let k = model.k();
    let w = &sol.encoder;
    let cov_z = w * model.observation_cov() * w.transpose();
    let cov_zs = w * model.mixing() * model.source_cov();
    let mut joint = DMatrix::zeros(2 * k, 2 * k);
    joint.view_mut((0, 0), (k, k)).copy_from(&cov_z);
    joint.view_mut((0, k), (k, k)).copy_from(&cov_zs);
    joint.view_mut((k, 0), (k, k)).copy_from(&cov_zs.transpose());
    joint.view_mut((k, k), (k, k)).copy_from(model.source_cov());
    joint
}

/// Noise variance `σ²` for which the base regressor's off-diagonal entry
/// equals `target` (A = I, equicorrelated sources). Used to calibrate the
/// noise level of a reported regression matrix.
pub fn fit_isotropic_noise(rho: f64, target_off_diagonal: f64) -> Result<f64> {
    let off = |sigma2: f64| -> Result<f64> {
        let model = LinearGaussianModel::isotropic(DMatrix::identity(2, 2), rho, sigma2)?;
        Ok(base_solution(&model)?.encoder[(0, 1)])
    };
    // The off-diagonal grows monotonically from 0 (σ² = 0) up to a peak;
    // bisect on the rising branch.
    let (mut lo, mut hi) = (1e-9, 1.0);
    if (off(lo)? - target_off_diagonal) * (off(hi)? - target_off_diagonal) > 0.0 {
        return Err(Error::InvalidArgument(format!(
            "off-diagonal {target_off_diagonal} unreachable for rho {rho}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (off(mid)? - target_off_diagonal) * (off(lo)? - target_off_diagonal) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
