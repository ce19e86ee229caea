//! Discriminator inputs: packs of latent samples, optionally tagged with the
//! conditioning attribute and its value.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;

use super::layout::SubspaceLayout;
use super::shuffle::{conditional_gather, marginal_gather, RowGather};
use crate::data::AttributeTable;

/// Which latent rows fill each pack slot; slot `s` belongs to pack
/// `s / pack_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct PackPlan {
    pub pack_size: usize,
    pub gather: RowGather,
    /// Conditioning attribute and the attribute value of every pack.
    pub condition: Option<(usize, Vec<usize>)>,
}

impl PackPlan {
    pub fn packs(&self) -> usize {
        self.gather.rows() / self.pack_size
    }
}

/// Shape of the discriminator input.
#[derive(Debug, Clone, PartialEq)]
pub struct PackFormat {
    pub layout: SubspaceLayout,
    pub pack_size: usize,
    /// `(attribute count, largest cardinality)` for conditional inputs.
    pub conditioning: Option<(usize, usize)>,
}

impl PackFormat {
    pub fn width(&self) -> usize {
        let cond = self.conditioning.map_or(0, |(k, c)| k + c);
        self.pack_size * self.layout.latent_dim() + cond
    }

    pub fn build(&self, plan: &PackPlan, z: &Array2<f64>) -> Array2<f64> {
        let d = self.layout.latent_dim();
        let m = self.pack_size;
        let owners = self.layout.column_owners();
        let packs = plan.packs();
        let mut out = Array2::zeros((packs, self.width()));
        for slot in 0..packs * m {
            let (p, j) = (slot / m, slot % m);
            for (c, &b) in owners.iter().enumerate() {
                out[(p, j * d + c)] = z[(plan.gather.sources[b][slot], c)];
            }
        }
        if let (Some((k_count, _)), Some((k, values))) = (self.conditioning, &plan.condition) {
            for (p, &v) in values.iter().enumerate() {
                out[(p, m * d + k)] = 1.0;
                out[(p, m * d + k_count + v)] = 1.0;
            }
        }
        out
    }

    /// Adds the latent part of an input gradient back onto the source rows.
    pub fn scatter(&self, plan: &PackPlan, grad_input: &Array2<f64>, grad_z: &mut Array2<f64>) {
        let d = self.layout.latent_dim();
        let m = self.pack_size;
        let owners = self.layout.column_owners();
        for slot in 0..plan.packs() * m {
            let (p, j) = (slot / m, slot % m);
            for (c, &b) in owners.iter().enumerate() {
                grad_z[(plan.gather.sources[b][slot], c)] += grad_input[(p, j * d + c)];
            }
        }
    }
}

fn truncate(gather: RowGather, slots: usize) -> RowGather {
    RowGather {
        sources: gather.sources.into_iter().map(|mut s| {
            s.truncate(slots);
            s
        }).collect(),
    }
}

/// Joint and marginally shuffled packs over the whole batch; rows beyond
/// the last full pack are dropped.
pub fn unconditional_plans(n: usize, k: usize, pack_size: usize, rng: &mut impl Rng) -> (PackPlan, PackPlan) {
    let slots = n / pack_size * pack_size;
    let joint = PackPlan {
        pack_size,
        gather: truncate(RowGather::identity(n, k), slots),
        condition: None,
    };
    let shuffled = PackPlan {
        pack_size,
        gather: truncate(marginal_gather(n, k, rng), slots),
        condition: None,
    };
    (joint, shuffled)
}

/// Joint and conditionally shuffled packs for attribute `k`, using only rows
/// where `s_k` is observed. Packs never mix attribute values; each value
/// group keeps only its full packs.
pub fn conditional_plans(
    attrs: &AttributeTable,
    k: usize,
    pack_size: usize,
    rng: &mut impl Rng,
) -> (PackPlan, PackPlan) {
    let num = attrs.k();
    let rows: Vec<usize> = (0..attrs.n()).filter(|&i| attrs.mask[(i, k)]).collect();
    let values: Vec<usize> = rows.iter().map(|&i| attrs.labels[(i, k)]).collect();
    let gather = conditional_gather(&values, k, num, rng);
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (pos, &v) in values.iter().enumerate() {
        groups.entry(v).or_default().push(pos);
    }
    let mut joint_src = Vec::new();
    let mut shuffled_src = vec![Vec::new(); num];
    let mut pack_values = Vec::new();
    for (&v, positions) in &groups {
        let full = positions.len() / pack_size * pack_size;
        for &pos in &positions[..full] {
            joint_src.push(rows[pos]);
            for (b, src) in shuffled_src.iter_mut().enumerate() {
                src.push(rows[gather.sources[b][pos]]);
            }
        }
        pack_values.extend(std::iter::repeat_n(v, full / pack_size));
    }
    let joint = PackPlan {
        pack_size,
        gather: RowGather {
            sources: vec![joint_src; num],
        },
        condition: Some((k, pack_values.clone())),
    };
    let shuffled = PackPlan {
        pack_size,
        gather: RowGather { sources: shuffled_src },
        condition: Some((k, pack_values)),
    };
    (joint, shuffled)
}
