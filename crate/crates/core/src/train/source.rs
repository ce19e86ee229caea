use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::data::{make_pair_batch, AttributeTable, DigitPools, OcclusionParams};
use crate::error::{Error, Result};

pub type Batch = (Array2<f64>, AttributeTable);

/// Supplies the minibatches of one epoch at a time.
pub trait BatchSource {
    fn input_dim(&self) -> usize;
    fn cardinalities(&self) -> Vec<usize>;
    fn epoch(&mut self, batch: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Batch>>;
}

/// A materialised dataset visited in a fresh random order every epoch; the
/// last minibatch may be smaller.
#[derive(Debug, Clone)]
pub struct FixedSource {
    pub x: Array2<f64>,
    pub attrs: AttributeTable,
}

impl FixedSource {
    pub fn new(x: Array2<f64>, attrs: AttributeTable) -> Result<Self> {
        if x.nrows() != attrs.n() {
            return Err(Error::ShapeMismatch(format!("{} inputs, {} attribute rows", x.nrows(), attrs.n())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("inputs contain non-finite values".into()));
        }
        Ok(FixedSource { x, attrs })
    }
}

impl BatchSource for FixedSource {
    fn input_dim(&self) -> usize {
        self.x.ncols()
    }

    fn cardinalities(&self) -> Vec<usize> {
        self.attrs.cardinalities.clone()
    }

    fn epoch(&mut self, batch: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Batch>> {
        let mut order: Vec<usize> = (0..self.x.nrows()).collect();
        order.shuffle(rng);
        Ok(order
            .chunks(batch)
            .map(|rows| (self.x.select(Axis(0), rows), self.attrs.select(rows)))
            .collect())
    }
}

/// Digit pairs generated on the fly; an epoch is a fixed number of batches.
#[derive(Debug, Clone)]
pub struct PairSource {
    pub pools: DigitPools,
    pub rho: f64,
    pub occlusion: OcclusionParams,
    pub batches_per_epoch: usize,
}

impl BatchSource for PairSource {
    fn input_dim(&self) -> usize {
        crate::data::mnist::PAIR_PIXELS
    }

    fn cardinalities(&self) -> Vec<usize> {
        vec![2, 2]
    }

    fn epoch(&mut self, batch: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Batch>> {
        (0..self.batches_per_epoch)
            .map(|_| {
                let b = make_pair_batch(&self.pools.threes, &self.pools.eights, self.rho, &self.occlusion, batch, rng)?;
                Ok((b.flat(), b.attributes()))
            })
            .collect()
    }
}
