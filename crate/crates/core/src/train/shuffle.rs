use std::collections::BTreeMap;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Row gather per subspace: output row `i` of subspace `j` is input row
/// `sources[j][i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowGather {
    pub sources: Vec<Vec<usize>>,
}

impl RowGather {
    pub fn identity(n: usize, k: usize) -> Self {
        RowGather {
            sources: vec![(0..n).collect(); k],
        }
    }

    pub fn rows(&self) -> usize {
        self.sources.first().map_or(0, Vec::len)
    }

    pub fn apply(&self, subspaces: &[Array2<f64>]) -> Vec<Array2<f64>> {
        subspaces
            .iter()
            .zip(&self.sources)
            .map(|(z, src)| z.select(Axis(0), src))
            .collect()
    }
}

/// Permutation of `0..values.len()` that only moves rows within groups of
/// equal value.
pub fn group_permutation(values: &[usize], rng: &mut impl Rng) -> Vec<usize> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &v) in values.iter().enumerate() {
        groups.entry(v).or_default().push(i);
    }
    let mut perm: Vec<usize> = (0..values.len()).collect();
    for rows in groups.values() {
        let mut shuffled = rows.clone();
        shuffled.shuffle(rng);
        for (&dst, &src) in rows.iter().zip(&shuffled) {
            perm[dst] = src;
        }
    }
    perm
}

/// Independent uniform row permutation for each of `k` subspaces.
pub fn marginal_gather(n: usize, k: usize, rng: &mut impl Rng) -> RowGather {
    let sources = (0..k)
        .map(|_| {
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(rng);
            p
        })
        .collect();
    RowGather { sources }
}

/// Subspace `k` stays in place; all other subspaces move together under one
/// permutation within each group of equal `values`.
pub fn conditional_gather(values: &[usize], k: usize, num_subspaces: usize, rng: &mut impl Rng) -> RowGather {
    let n = values.len();
    let perm = group_permutation(values, rng);
    let sources = (0..num_subspaces)
        .map(|j| if j == k { (0..n).collect() } else { perm.clone() })
        .collect();
    RowGather { sources }
}

fn check_rows(subspaces: &[Array2<f64>]) -> Result<usize> {
    let n = subspaces.first().map_or(0, |z| z.nrows());
    if subspaces.iter().any(|z| z.nrows() != n) {
        return Err(Error::ShapeMismatch("subspaces have different batch sizes".into()));
    }
    Ok(n)
}

/// Samples from the product of subspace marginals by permuting every
/// subspace independently.
pub fn shuffle_marginals(subspaces: &[Array2<f64>], rng: &mut impl Rng) -> Result<Vec<Array2<f64>>> {
    let n = check_rows(subspaces)?;
    Ok(marginal_gather(n, subspaces.len(), rng).apply(subspaces))
}

/// Samples from `p(z_k | s_k) p(z_{−k} | s_k)`: within each group of equal
/// `s_k`, the complement block is permuted jointly while `z_k` stays put.
pub fn conditional_shuffle(
    subspaces: &[Array2<f64>],
    s_k: &[usize],
    k: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Array2<f64>>> {
    let n = check_rows(subspaces)?;
    if s_k.len() != n {
        return Err(Error::ShapeMismatch(format!("{} attribute values for {n} rows", s_k.len())));
    }
    if k >= subspaces.len() {
        return Err(Error::InvalidArgument(format!("attribute {k} out of {} subspaces", subspaces.len())));
    }
    Ok(conditional_gather(s_k, k, subspaces.len(), rng).apply(subspaces))
}
