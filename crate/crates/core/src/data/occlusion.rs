use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcclusionParams {
    /// Fraction of pixels covered.
    pub level: f64,
    /// Lattice resolution of the value noise.
    pub grid: usize,
    /// Gray intensity painted on covered pixels.
    pub fill_value: f64,
}

impl Default for OcclusionParams {
    fn default() -> Self {
        OcclusionParams {
            level: 0.0,
            grid: 4,
            fill_value: 0.5,
        }
    }
}

impl OcclusionParams {
    pub fn with_level(level: f64) -> Self {
        OcclusionParams {
            level,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.level) {
            return Err(Error::InvalidArgument(format!("occlusion level {} not in [0, 1]", self.level)));
        }
        if !(0.0..=1.0).contains(&self.fill_value) {
            return Err(Error::InvalidArgument(format!("fill value {} not in [0, 1]", self.fill_value)));
        }
        if self.grid < 2 {
            return Err(Error::InvalidArgument(format!("noise grid {} < 2", self.grid)));
        }
        Ok(())
    }
}

fn value_noise(h: usize, w: usize, grid: usize, rng: &mut impl Rng) -> Vec<f64> {
    let lattice: Vec<f64> = (0..grid * grid).map(|_| rng.random::<f64>()).collect();
    let scale = (grid - 1) as f64;
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        let v = (y as f64 + 0.5) / h as f64 * scale;
        let y0 = (v.floor() as usize).min(grid - 2);
        let fy = v - y0 as f64;
        for x in 0..w {
            let u = (x as f64 + 0.5) / w as f64 * scale;
            let x0 = (u.floor() as usize).min(grid - 2);
            let fx = u - x0 as f64;
            let at = |r: usize, c: usize| lattice[r * grid + c];
            let top = at(y0, x0) * (1.0 - fx) + at(y0, x0 + 1) * fx;
            let bottom = at(y0 + 1, x0) * (1.0 - fx) + at(y0 + 1, x0 + 1) * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// Smooth blob mask covering exactly `round(level · h · w)` pixels: the
/// highest values of bilinearly interpolated lattice noise.
pub fn occlusion_mask(h: usize, w: usize, params: &OcclusionParams, rng: &mut impl Rng) -> Result<Array2<bool>> {
    params.validate()?;
    let total = h * w;
    let count = ((params.level * total as f64).round() as usize).min(total);
    let mut mask = Array2::from_elem((h, w), false);
    if count == 0 {
        return Ok(mask);
    }
    let noise = value_noise(h, w, params.grid, rng);
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| noise[b].total_cmp(&noise[a]).then(a.cmp(&b)));
    let flat = mask.as_slice_mut().expect("standard layout");
    for &i in &order[..count] {
        flat[i] = true;
    }
    Ok(mask)
}

/// Number of 4-connected components of `true` pixels.
pub fn count_components(mask: &Array2<bool>) -> usize {
    let (h, w) = mask.dim();
    let mut seen = Array2::from_elem((h, w), false);
    let mut components = 0;
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask[(y, x)] || seen[(y, x)] {
                continue;
            }
            components += 1;
            seen[(y, x)] = true;
            stack.push((y, x));
            while let Some((cy, cx)) = stack.pop() {
                let neighbours = [
                    (cy.wrapping_sub(1), cx),
                    (cy + 1, cx),
                    (cy, cx.wrapping_sub(1)),
                    (cy, cx + 1),
                ];
                for (ny, nx) in neighbours {
                    if ny < h && nx < w && mask[(ny, nx)] && !seen[(ny, nx)] {
                        seen[(ny, nx)] = true;
                        stack.push((ny, nx));
                    }
                }
            }
        }
    }
    components
}

/// Paints `fill` onto the masked pixels of a row-major `h × w` image.
pub fn apply_mask(image: &mut [f64], mask: &Array2<bool>, fill: f64) {
    for (p, &m) in image.iter_mut().zip(mask.iter()) {
        if m {
            *p = fill;
        }
    }
}
