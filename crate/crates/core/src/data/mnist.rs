use std::path::Path;

use ndarray::{s, Array2, Array3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::attributes::AttributeTable;
use super::idx::{read_idx_file, IdxData};
use super::occlusion::{apply_mask, occlusion_mask, OcclusionParams};
use crate::error::{Error, Result};

pub const DIGIT_SIDE: usize = 32;
pub const PAIR_WIDTH: usize = 2 * DIGIT_SIDE;
pub const PAIR_PIXELS: usize = DIGIT_SIDE * PAIR_WIDTH;
pub const VALIDATION_SIZE: usize = 10_000;

/// Bilinear resize of a row-major image with half-pixel centres.
pub fn resize_bilinear(src: &[f64], sh: usize, sw: usize, dh: usize, dw: usize) -> Vec<f64> {
    assert_eq!(src.len(), sh * sw, "source size");
    let coord = |d: usize, sd: usize, dd: usize| -> (usize, usize, f64) {
        let v = ((d as f64 + 0.5) * sd as f64 / dd as f64 - 0.5).clamp(0.0, (sd - 1) as f64);
        let lo = v.floor() as usize;
        let hi = (lo + 1).min(sd - 1);
        (lo, hi, v - lo as f64)
    };
    let mut out = Vec::with_capacity(dh * dw);
    for y in 0..dh {
        let (y0, y1, fy) = coord(y, sh, dh);
        for x in 0..dw {
            let (x0, x1, fx) = coord(x, sw, dw);
            let top = src[y0 * sw + x0] * (1.0 - fx) + src[y0 * sw + x1] * fx;
            let bottom = src[y1 * sw + x0] * (1.0 - fx) + src[y1 * sw + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// Resized 32×32 instances of digit 3 (class 0) and digit 8 (class 1).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DigitPools {
    pub threes: Vec<Vec<f64>>,
    pub eights: Vec<Vec<f64>>,
}

impl DigitPools {
    pub fn from_idx(images: &Array3<u8>, labels: &[u8]) -> Result<Self> {
        let (n, h, w) = images.dim();
        if labels.len() != n {
            return Err(Error::ShapeMismatch(format!("{n} images but {} labels", labels.len())));
        }
        let mut pools = DigitPools::default();
        for (i, &label) in labels.iter().enumerate() {
            let target = match label {
                3 => &mut pools.threes,
                8 => &mut pools.eights,
                _ => continue,
            };
            let raw: Vec<f64> = images.slice(s![i, .., ..]).iter().map(|&p| p as f64 / 255.0).collect();
            target.push(resize_bilinear(&raw, h, w, DIGIT_SIDE, DIGIT_SIDE));
        }
        Ok(pools)
    }

    pub fn pool(&self, class: usize) -> &[Vec<f64>] {
        if class == 0 {
            &self.threes
        } else {
            &self.eights
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnistSplits {
    pub train: DigitPools,
    pub val: DigitPools,
    pub test: DigitPools,
}

/// First existing candidate under `dir`, or the first name for the error.
fn locate(dir: &Path, names: &[String]) -> std::path::PathBuf {
    names
        .iter()
        .map(|n| dir.join(n))
        .find(|p| p.exists())
        .unwrap_or_else(|| dir.join(&names[0]))
}

fn load_pair(dir: &Path, stem: &str, original: &str) -> Result<(Array3<u8>, Vec<u8>)> {
    let image_path = locate(dir, &[format!("{stem}-images.idx"), format!("{original}-images-idx3-ubyte")]);
    let label_path = locate(dir, &[format!("{stem}-labels.idx"), format!("{original}-labels-idx1-ubyte")]);
    let images = match read_idx_file(&image_path)? {
        IdxData::Images(a) => a,
        IdxData::Labels(_) => return Err(Error::MissingData(format!("{} holds labels", image_path.display()))),
    };
    let labels = match read_idx_file(&label_path)? {
        IdxData::Labels(l) => l.to_vec(),
        IdxData::Images(_) => return Err(Error::MissingData(format!("{} holds images", label_path.display()))),
    };
    Ok((images, labels))
}

/// Loads `<data_root>/mnist/{train,test}-{images,labels}.idx`, falling back
/// to the original distribution names (`train-images-idx3-ubyte`,
/// `t10k-labels-idx1-ubyte`, ...). The last 10 000 training images form the
/// validation split.
pub fn load_mnist(data_root: impl AsRef<Path>) -> Result<MnistSplits> {
    let dir = data_root.as_ref().join("mnist");
    let (train_images, train_labels) = load_pair(&dir, "train", "train")?;
    let (test_images, test_labels) = load_pair(&dir, "test", "t10k")?;
    let n = train_labels.len();
    if n <= VALIDATION_SIZE {
        return Err(Error::MissingData(format!("training file has only {n} images")));
    }
    let cut = n - VALIDATION_SIZE;
    let train = DigitPools::from_idx(&train_images.slice(s![..cut, .., ..]).to_owned(), &train_labels[..cut])?;
    let val = DigitPools::from_idx(&train_images.slice(s![cut.., .., ..]).to_owned(), &train_labels[cut..])?;
    let test = DigitPools::from_idx(&test_images, &test_labels)?;
    Ok(MnistSplits { train, val, test })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigitPairBatch {
    /// `batch × 32 × 64` intensities in `[0, 1]`.
    pub images: Array3<f64>,
    pub left_labels: Vec<usize>,
    pub right_labels: Vec<usize>,
}

impl DigitPairBatch {
    pub fn len(&self) -> usize {
        self.left_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left_labels.is_empty()
    }

    /// Flattened `batch × 2048` inputs.
    pub fn flat(&self) -> Array2<f64> {
        let b = self.len();
        self.images
            .to_shape((b, PAIR_PIXELS))
            .expect("contiguous batch")
            .to_owned()
    }

    pub fn attributes(&self) -> AttributeTable {
        let labels = Array2::from_shape_fn((self.len(), 2), |(i, k)| {
            if k == 0 {
                self.left_labels[i]
            } else {
                self.right_labels[i]
            }
        });
        AttributeTable::binary(labels).expect("binary labels")
    }
}

/// On-the-fly pairs whose left and right classes agree with probability
/// `(1 + rho) / 2`.
pub fn make_pair_batch(
    pool_3: &[Vec<f64>],
    pool_8: &[Vec<f64>],
    rho: f64,
    occlusion: &OcclusionParams,
    batch: usize,
    rng: &mut impl Rng,
) -> Result<DigitPairBatch> {
    if pool_3.is_empty() {
        return Err(Error::EmptyPool(3));
    }
    if pool_8.is_empty() {
        return Err(Error::EmptyPool(8));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("correlation {rho} not in [-1, 1]")));
    }
    occlusion.validate()?;
    let side = DIGIT_SIDE * DIGIT_SIDE;
    if pool_3.iter().chain(pool_8).any(|img| img.len() != side) {
        return Err(Error::ShapeMismatch(format!("pool images must have {side} pixels")));
    }
    let p_match = (1.0 + rho) / 2.0;
    let mut images = Array3::zeros((batch, DIGIT_SIDE, PAIR_WIDTH));
    let mut left_labels = Vec::with_capacity(batch);
    let mut right_labels = Vec::with_capacity(batch);
    for b in 0..batch {
        let left = rng.random::<bool>() as usize;
        let right = if rng.random::<f64>() < p_match { left } else { 1 - left };
        for (half, class) in [left, right].into_iter().enumerate() {
            let pool = if class == 0 { pool_3 } else { pool_8 };
            let mut digit = pool[rng.random_range(0..pool.len())].clone();
            if occlusion.level > 0.0 {
                let mask = occlusion_mask(DIGIT_SIDE, DIGIT_SIDE, occlusion, rng)?;
                apply_mask(&mut digit, &mask, occlusion.fill_value);
            }
            let offset = half * DIGIT_SIDE;
            for (j, &p) in digit.iter().enumerate() {
                images[(b, j / DIGIT_SIDE, offset + j % DIGIT_SIDE)] = p.clamp(0.0, 1.0);
            }
        }
        left_labels.push(left);
        right_labels.push(right);
    }
    Ok(DigitPairBatch {
        images,
        left_labels,
        right_labels,
    })
}

/// Deterministic synthetic stand-ins for digit pools: class 0 images are
/// bright in the upper half, class 1 in the lower half, plus pixel noise.
pub fn synthetic_pools(per_class: usize, rng: &mut impl Rng) -> DigitPools {
    let make = |upper: bool, rng: &mut dyn rand::RngCore| -> Vec<f64> {
        (0..DIGIT_SIDE * DIGIT_SIDE)
            .map(|j| {
                let row = j / DIGIT_SIDE;
                let bright = (row < DIGIT_SIDE / 2) == upper;
                let base = if bright { 0.8 } else { 0.1 };
                (base + 0.2 * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0)
            })
            .collect()
    };
    DigitPools {
        threes: (0..per_class).map(|_| make(true, rng)).collect(),
        eights: (0..per_class).map(|_| make(false, rng)).collect(),
    }
}
