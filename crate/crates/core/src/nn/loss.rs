use ndarray::Array2;

use crate::error::{Error, Result};

/// `log σ(x)` without overflow.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean cross-entropy of softmax logits and its gradient.
pub fn cross_entropy_logits(logits: &Array2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    cross_entropy_masked(logits, labels, None)
}

/// Cross-entropy averaged over the rows where `mask` is true; other rows get
/// zero gradient. With no labelled rows the loss is zero.
pub fn cross_entropy_masked(
    logits: &Array2<f64>,
    labels: &[usize],
    mask: Option<&[bool]>,
) -> Result<(f64, Array2<f64>)> {
    let (n, c) = logits.dim();
    if labels.len() != n || mask.is_some_and(|m| m.len() != n) {
        return Err(Error::ShapeMismatch(format!("{n} logit rows, {} labels", labels.len())));
    }
    let used = |i: usize| mask.is_none_or(|m| m[i]);
    let count = (0..n).filter(|&i| used(i)).count();
    let mut grad = Array2::zeros((n, c));
    if count == 0 {
        return Ok((0.0, grad));
    }
    let mut total = 0.0;
    for (i, row) in logits.rows().into_iter().enumerate() {
        if !used(i) {
            continue;
        }
        let y = labels[i];
        if y >= c {
            return Err(Error::LabelOutOfRange { label: y, classes: c });
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        total += lse - row[y];
        for (j, v) in row.iter().enumerate() {
            let p = (v - lse).exp();
            grad[(i, j)] = (p - if j == y { 1.0 } else { 0.0 }) / count as f64;
        }
    }
    Ok((total / count as f64, grad))
}

/// Mean binary cross-entropy `−t log σ(l) − (1−t) log(1−σ(l))` and its
/// gradient with respect to each logit.
pub fn bce_logits(logits: &[f64], targets: &[f64]) -> (f64, Vec<f64>) {
    let n = logits.len().max(1) as f64;
    let mut total = 0.0;
    let grad = logits
        .iter()
        .zip(targets)
        .map(|(&l, &t)| {
            total -= t * log_sigmoid(l) + (1.0 - t) * log_sigmoid(-l);
            (sigmoid(l) - t) / n
        })
        .collect();
    (total / n, grad)
}
