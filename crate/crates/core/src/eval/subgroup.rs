use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::Predictor;
use crate::data::AttributeTable;
use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Array2<usize>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.sum()
    }

    pub fn accuracy(&self) -> f64 {
        let hits: usize = (0..self.counts.nrows()).map(|i| self.counts[(i, i)]).sum();
        hits as f64 / self.total().max(1) as f64
    }
}

fn predictions(model: &dyn Predictor, x: &Array2<f64>, attrs: &AttributeTable) -> Result<Array2<usize>> {
    if attrs.mask.iter().any(|m| !m) {
        return Err(Error::InvalidArgument("evaluation batch has unlabeled entries".into()));
    }
    let pred = model.predict(x)?;
    if pred.dim() != attrs.labels.dim() {
        return Err(Error::ShapeMismatch(format!(
            "predictions {:?}, labels {:?}",
            pred.dim(),
            attrs.labels.dim()
        )));
    }
    Ok(pred)
}

/// One confusion matrix per attribute. Predicted classes outside the
/// attribute's range are an error.
pub fn confusion(model: &dyn Predictor, x: &Array2<f64>, attrs: &AttributeTable) -> Result<Vec<ConfusionMatrix>> {
    let pred = predictions(model, x, attrs)?;
    (0..attrs.k())
        .map(|k| {
            let c = attrs.cardinalities[k];
            let mut counts = Array2::zeros((c, c));
            for i in 0..attrs.n() {
                let p = pred[(i, k)];
                if p >= c {
                    return Err(Error::LabelOutOfRange { label: p, classes: c });
                }
                counts[(attrs.labels[(i, k)], p)] += 1;
            }
            Ok(ConfusionMatrix { counts })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupCell {
    pub values: Vec<usize>,
    pub count: usize,
    pub errors: usize,
    /// `None` when the cell has no rows.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupReport {
    pub cells: Vec<SubgroupCell>,
}

impl SubgroupReport {
    pub fn cell(&self, values: &[usize]) -> Option<&SubgroupCell> {
        self.cells.iter().find(|c| c.values == values)
    }

    pub fn missing(&self) -> Vec<&SubgroupCell> {
        self.cells.iter().filter(|c| c.rate.is_none()).collect()
    }
}

/// Error rate of every combination of attribute values, in lexicographic
/// order. A row is an error if any attribute is mispredicted.
pub fn subgroup_error(model: &dyn Predictor, x: &Array2<f64>, attrs: &AttributeTable) -> Result<SubgroupReport> {
    let pred = predictions(model, x, attrs)?;
    let cards = &attrs.cardinalities;
    let total: usize = cards.iter().product();
    let mut count = vec![0usize; total];
    let mut errors = vec![0usize; total];
    for i in 0..attrs.n() {
        let mut idx = 0;
        let mut wrong = false;
        for k in 0..attrs.k() {
            idx = idx * cards[k] + attrs.labels[(i, k)];
            wrong |= pred[(i, k)] != attrs.labels[(i, k)];
        }
        count[idx] += 1;
        errors[idx] += wrong as usize;
    }
    let cells = (0..total)
        .map(|idx| {
            let mut values = vec![0; cards.len()];
            let mut rem = idx;
            for k in (0..cards.len()).rev() {
                values[k] = rem % cards[k];
                rem /= cards[k];
            }
            SubgroupCell {
                values,
                count: count[idx],
                errors: errors[idx],
                rate: (count[idx] > 0).then(|| errors[idx] as f64 / count[idx] as f64),
            }
        })
        .collect();
    Ok(SubgroupReport { cells })
}
