pub mod attributes;
pub mod idx;
pub mod mnist;
pub mod occlusion;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub use attributes::{
    mask_labels, phi, sample_correlated_attributes, subsample_to_correlation, toy_observations,
    AttributeTable, ToyDataset, ToyProvenance,
};
pub use idx::{parse_idx, write_idx, IdxData};
pub use mnist::{load_mnist, make_pair_batch, DigitPairBatch, DigitPools, MnistSplits};
pub use occlusion::{occlusion_mask, OcclusionParams};

use crate::error::Result;

/// Hex SHA-256 of raw bytes, used to fingerprint data files.
pub fn bytes_fingerprint(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hex SHA-256 over the bit patterns of `x` and the labels and mask of
/// `attrs`.
pub fn dataset_fingerprint(x: &Array2<f64>, attrs: &AttributeTable) -> String {
    let mut h = Sha256::new();
    for d in x.shape() {
        h.update((*d as u64).to_le_bytes());
    }
    x.iter().for_each(|v| h.update(v.to_bits().to_le_bytes()));
    attrs.labels.iter().for_each(|&v| h.update((v as u64).to_le_bytes()));
    attrs.mask.iter().for_each(|&m| h.update([m as u8]));
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl ToyDataset {
    /// `n` toy samples at attribute correlation `rho`, reproducible from `seed`.
    pub fn generate(mixing: &Array2<f64>, sigma: f64, rho: f64, n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let attrs = sample_correlated_attributes(mixing.nrows(), rho, n, &mut rng)?;
        let x = toy_observations(&attrs, mixing, sigma, &mut rng)?;
        Ok(ToyDataset {
            x,
            attrs,
            provenance: ToyProvenance {
                mixing: mixing.clone(),
                sigma,
                rho,
                seed,
            },
        })
    }
}
