use ndarray::{Array2, Axis};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Attribute labels as class indices, with a per-cell "label observed" mask.
/// Binary attributes use class 1 for `s = +1` and class 0 for `s = −1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeTable {
    pub labels: Array2<usize>,
    pub cardinalities: Vec<usize>,
    pub mask: Array2<bool>,
}

impl AttributeTable {
    pub fn new(labels: Array2<usize>, cardinalities: Vec<usize>) -> Result<Self> {
        if labels.ncols() != cardinalities.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} label columns for {} cardinalities",
                labels.ncols(),
                cardinalities.len()
            )));
        }
        for (k, col) in labels.axis_iter(Axis(1)).enumerate() {
            if let Some(&bad) = col.iter().find(|&&v| v >= cardinalities[k]) {
                return Err(Error::LabelOutOfRange {
                    label: bad,
                    classes: cardinalities[k],
                });
            }
        }
        let mask = Array2::from_elem(labels.dim(), true);
        Ok(AttributeTable {
            labels,
            cardinalities,
            mask,
        })
    }

    pub fn binary(labels: Array2<usize>) -> Result<Self> {
        let k = labels.ncols();
        Self::new(labels, vec![2; k])
    }

    pub fn n(&self) -> usize {
        self.labels.nrows()
    }

    pub fn k(&self) -> usize {
        self.labels.ncols()
    }

    /// `±1` encoding of binary attributes.
    pub fn signed(&self) -> Array2<f64> {
        self.labels.mapv(|v| if v == 1 { 1.0 } else { -1.0 })
    }

    pub fn labeled_count(&self, k: usize) -> usize {
        self.mask.column(k).iter().filter(|&&m| m).count()
    }

    pub fn select(&self, rows: &[usize]) -> AttributeTable {
        AttributeTable {
            labels: self.labels.select(Axis(0), rows),
            cardinalities: self.cardinalities.clone(),
            mask: self.mask.select(Axis(0), rows),
        }
    }
}

/// Binary attributes with uniform marginals and pairwise correlation `rho`.
///
/// Two attributes are sampled exactly with `P(s1 = s2) = (1 + rho) / 2`.
/// For more attributes each one independently copies a shared uniform bit
/// with probability `sqrt(rho)` and is otherwise an independent coin, which
/// gives every pair correlation `rho`; negative correlations are rejected.
pub fn sample_correlated_attributes(
    k: usize,
    rho: f64,
    n: usize,
    rng: &mut impl Rng,
) -> Result<AttributeTable> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 attributes, got {k}")));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InfeasibleCorrelation {
            rho,
            k,
            reason: "correlation must lie in [-1, 1]".into(),
        });
    }
    if k > 2 && rho < 0.0 {
        return Err(Error::InfeasibleCorrelation {
            rho,
            k,
            reason: "negative correlations are only generated for two attributes".into(),
        });
    }
    let mut labels = Array2::zeros((n, k));
    if k == 2 {
        let p_match = (1.0 + rho) / 2.0;
        for mut row in labels.rows_mut() {
            let first = rng.random::<bool>() as usize;
            let matched = rng.random::<f64>() < p_match;
            row[0] = first;
            row[1] = if matched { first } else { 1 - first };
        }
    } else {
        let q = rho.sqrt();
        for mut row in labels.rows_mut() {
            let shared = rng.random::<bool>() as usize;
            for v in row.iter_mut() {
                *v = if rng.random::<f64>() < q {
                    shared
                } else {
                    rng.random::<bool>() as usize
                };
            }
        }
    }
    AttributeTable::binary(labels)
}

/// Where a toy dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyProvenance {
    pub mixing: Array2<f64>,
    pub sigma: f64,
    pub rho: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyDataset {
    pub x: Array2<f64>,
    pub attrs: AttributeTable,
    pub provenance: ToyProvenance,
}

/// `x_i = A s_i + n_i` with `s_i ∈ {±1}^K` and `n_i ~ N(0, σ² I)`.
pub fn toy_observations(
    attrs: &AttributeTable,
    mixing: &Array2<f64>,
    sigma: f64,
    rng: &mut impl Rng,
) -> Result<Array2<f64>> {
    let k = attrs.k();
    if mixing.nrows() != k || mixing.ncols() != k {
        return Err(Error::ShapeMismatch(format!(
            "mixing is {}x{}, attributes have K = {k}",
            mixing.nrows(),
            mixing.ncols()
        )));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma {sigma} < 0")));
    }
    let mut x = attrs.signed().dot(&mixing.t());
    if sigma > 0.0 {
        x.mapv_inplace(|v| v + sigma * rng.sample::<f64, _>(StandardNormal));
    }
    Ok(x)
}

/// Keeps each attribute's label on `round(fraction · n)` uniformly chosen
/// rows, independently per attribute.
pub fn mask_labels(attrs: &AttributeTable, fraction: f64, rng: &mut impl Rng) -> Result<AttributeTable> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("label fraction {fraction} not in (0, 1]")));
    }
    let n = attrs.n();
    let keep = (fraction * n as f64).round() as usize;
    let mut out = attrs.clone();
    for k in 0..attrs.k() {
        let mut retained = vec![false; n];
        for i in sample_indices(rng, n, keep.min(n)) {
            retained[i] = true;
        }
        for (i, m) in out.mask.column_mut(k).iter_mut().enumerate() {
            *m = *m && retained[i];
        }
    }
    Ok(out)
}

fn phi_coefficient(c00: f64, c01: f64, c10: f64, c11: f64) -> f64 {
    let denom = ((c00 + c01) * (c10 + c11) * (c00 + c10) * (c01 + c11)).sqrt();
    if denom > 0.0 {
        (c00 * c11 - c01 * c10) / denom
    } else {
        0.0
    }
}

/// Phi coefficient of the first two binary attributes.
pub fn phi(attrs: &AttributeTable) -> f64 {
    let c = cell_counts(attrs);
    phi_coefficient(c[0] as f64, c[1] as f64, c[2] as f64, c[3] as f64)
}

/// Counts of `(s1, s2)` in order `00, 01, 10, 11`.
pub fn cell_counts(attrs: &AttributeTable) -> [usize; 4] {
    let mut c = [0usize; 4];
    for row in attrs.labels.rows() {
        c[row[0] * 2 + row[1]] += 1;
    }
    c
}

/// Correlation tolerance of [`subsample_to_correlation`].
pub const SUBSAMPLE_TOL: f64 = 1e-3;

/// Largest balanced cell allocation `(a, b)` with `c00 = c11 = a` and
/// `c01 = c10 = b` under the given caps (order `00, 01, 10, 11`) whose phi
/// coefficient `(a − b) / (a + b)` is within [`SUBSAMPLE_TOL`] of `rho`.
pub fn balanced_cell_allocation(caps: [usize; 4], rho: f64) -> Option<(usize, usize)> {
    let diag_cap = caps[0].min(caps[3]);
    let off_cap = caps[1].min(caps[2]);
    // Solve for non-negative targets with (diag, off) and mirror otherwise.
    let (cap_a, cap_b, target, mirrored) = if rho >= 0.0 {
        (diag_cap, off_cap, rho, false)
    } else {
        (off_cap, diag_cap, -rho, true)
    };
    let t = SUBSAMPLE_TOL;
    let ok = |a: usize, b: usize| {
        a + b > 0 && ((a as f64 - b as f64) / (a + b) as f64 - target).abs() <= t
    };
    let mut best: Option<(usize, usize)> = None;
    for a in 1..=cap_a {
        let af = a as f64;
        let hi = (af * (1.0 - target + t) / (1.0 + target - t)).floor() as i64 + 1;
        let hi = hi.min(cap_b as i64);
        let lo = ((af * (1.0 - target - t) / (1.0 + target + t)).ceil() as i64 - 1).max(0);
        let found = (lo..=hi).rev().map(|b| b as usize).find(|&b| ok(a, b));
        if let Some(b) = found {
            if best.is_none_or(|(ba, bb)| a + b > ba + bb) {
                best = Some((a, b));
            }
        }
    }
    best.map(|(a, b)| if mirrored { (b, a) } else { (a, b) })
}

/// Row indices of the largest subset of a two-attribute binary table whose
/// phi coefficient matches `rho_target` and whose marginals stay balanced.
/// Rows inside each cell are chosen uniformly with `rng`; the result is
/// sorted.
pub fn subsample_to_correlation(
    attrs: &AttributeTable,
    rho_target: f64,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    if attrs.k() != 2 || attrs.cardinalities.iter().any(|&c| c != 2) {
        return Err(Error::InvalidArgument(
            "exact-correlation subsampling needs exactly two binary attributes".into(),
        ));
    }
    if !(-1.0..=1.0).contains(&rho_target) {
        return Err(Error::Infeasible { rho_target });
    }
    let mut cells: [Vec<usize>; 4] = Default::default();
    for (i, row) in attrs.labels.rows().into_iter().enumerate() {
        cells[row[0] * 2 + row[1]].push(i);
    }
    let caps = [cells[0].len(), cells[1].len(), cells[2].len(), cells[3].len()];
    let (diag, off) = balanced_cell_allocation(caps, rho_target).ok_or(Error::Infeasible { rho_target })?;
    let take = [diag, off, off, diag];
    let mut rows = Vec::with_capacity(2 * (diag + off));
    for (cell, &count) in cells.iter().zip(&take) {
        rows.extend(sample_indices(rng, cell.len(), count).into_iter().map(|j| cell[j]));
    }
    rows.sort_unstable();
    Ok(rows)
}
