//! Dense networks with hand-written reverse passes, losses and Adam.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod loss;
pub mod mlp;

pub use adam::AdamState;
pub use checkpoint::{Checkpoint, NamedTensor};
pub use loss::{bce_logits, cross_entropy_logits, cross_entropy_masked, log_sigmoid};
pub use mlp::{Activation, Mlp, MlpCache, MlpSpec};

/// Ordered collection of named parameter tensors.
pub trait Parameters {
    /// `(name, shape, values)` for every tensor, in a fixed order.
    fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])>;
    fn slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.2.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.2.iter().all(|v| v.is_finite()))
    }
}

impl<P: Parameters> Parameters for Vec<P> {
    fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        self.iter()
            .enumerate()
            .flat_map(|(i, p)| {
                p.tensors()
                    .into_iter()
                    .map(move |(name, shape, v)| (format!("{i}.{name}"), shape, v))
            })
            .collect()
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.iter_mut().flat_map(|p| p.slices_mut()).collect()
    }
}

/// Adds `other` into `acc` tensor by tensor.
pub fn accumulate<P: Parameters>(acc: &mut P, other: &P, scale: f64) {
    let src: Vec<Vec<f64>> = other.tensors().into_iter().map(|t| t.2.to_vec()).collect();
    for (dst, s) in acc.slices_mut().into_iter().zip(src) {
        for (d, v) in dst.iter_mut().zip(s) {
            *d += scale * v;
        }
    }
}
