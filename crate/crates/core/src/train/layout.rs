use std::ops::Range;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Widths of the per-attribute latent subspaces, in attribute order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspaceLayout {
    pub dims: Vec<usize>,
}

impl SubspaceLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::LayoutMismatch(format!("subspace widths must be positive: {dims:?}")));
        }
        Ok(SubspaceLayout { dims })
    }

    /// `k` subspaces of width `width` each.
    pub fn uniform(k: usize, width: usize) -> Result<Self> {
        Self::new(vec![width; k])
    }

    pub fn k(&self) -> usize {
        self.dims.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn range(&self, k: usize) -> Range<usize> {
        let start: usize = self.dims[..k].iter().sum();
        start..start + self.dims[k]
    }

    /// Subspace index of every latent column.
    pub fn column_owners(&self) -> Vec<usize> {
        self.dims
            .iter()
            .enumerate()
            .flat_map(|(k, &d)| std::iter::repeat_n(k, d))
            .collect()
    }

    fn check(&self, z: &ArrayView2<f64>) -> Result<()> {
        if z.ncols() != self.latent_dim() {
            return Err(Error::LayoutMismatch(format!(
                "latent width {} but subspaces sum to {}",
                z.ncols(),
                self.latent_dim()
            )));
        }
        Ok(())
    }
}

pub fn split_subspaces(z: &Array2<f64>, layout: &SubspaceLayout) -> Result<Vec<Array2<f64>>> {
    layout.check(&z.view())?;
    Ok((0..layout.k())
        .map(|k| z.slice(s![.., layout.range(k)]).to_owned())
        .collect())
}

pub fn concat_subspaces(parts: &[Array2<f64>]) -> Result<Array2<f64>> {
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    concatenate(Axis(1), &views).map_err(|e| Error::LayoutMismatch(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_and_concat() {
        let z = Array2::from_shape_fn((3, 10), |(i, j)| (i * 10 + j) as f64);
        let layout = SubspaceLayout::uniform(2, 5).unwrap();
        let parts = split_subspaces(&z, &layout).unwrap();
        assert_eq!(parts[0], z.slice(s![.., 0..5]));
        assert_eq!(parts[1], z.slice(s![.., 5..10]));
        assert_eq!(concat_subspaces(&parts).unwrap(), z);
        let one = SubspaceLayout::new(vec![10]).unwrap();
        assert_eq!(split_subspaces(&z, &one).unwrap(), vec![z.clone()]);
        let bad = SubspaceLayout::new(vec![4, 4]).unwrap();
        assert!(matches!(split_subspaces(&z, &bad), Err(Error::LayoutMismatch(_))));
        assert_eq!(layout.column_owners(), vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
    }
}
