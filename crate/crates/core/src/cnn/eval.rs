use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::FaultClass;

use super::model::{argmax, to_real, Model};
use super::train::Labeled;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: FaultClass,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Classification quality over a labeled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<FaultClass>,
    pub total: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[true][predicted]` counts.
    pub confusion: Vec<Vec<u64>>,
}

impl EvalReport {
    /// Builds the report from `(true, predicted)` class pairs. Precision of
    /// a class never predicted is 0, as is F1 when precision + recall is 0.
    pub fn from_pairs(classes: &[FaultClass], pairs: &[(FaultClass, FaultClass)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::invalid("cannot evaluate an empty set"));
        }
        let index = |c: FaultClass| {
            classes
                .iter()
                .position(|&k| k == c)
                .ok_or_else(|| Error::invalid(format!("class {c} not among evaluated classes")))
        };
        let n = classes.len();
        let mut confusion = vec![vec![0u64; n]; n];
        for &(t, p) in pairs {
            confusion[index(t)?][index(p)?] += 1;
        }
        let total = pairs.len() as u64;
        let trace: u64 = (0..n).map(|i| confusion[i][i]).sum();
        let per_class: Vec<ClassMetrics> = (0..n)
            .map(|i| {
                let tp = confusion[i][i] as f64;
                let support: u64 = confusion[i].iter().sum();
                let predicted: u64 = (0..n).map(|r| confusion[r][i]).sum();
                let precision = if predicted == 0 {
                    0.0
                } else {
                    tp / predicted as f64
                };
                let recall = if support == 0 {
                    0.0
                } else {
                    tp / support as f64
                };
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassMetrics {
                    class: classes[i],
                    support,
                    precision,
                    recall,
                    f1,
                }
            })
            .collect();
        let macro_f1 = per_class.iter().map(|m| m.f1).sum::<f64>() / n as f64;
        Ok(Self {
            classes: classes.to_vec(),
            total,
            accuracy: trace as f64 / total as f64,
            macro_f1,
            per_class,
            confusion,
        })
    }

    pub fn recall(&self, class: FaultClass) -> Option<f64> {
        self.per_class
            .iter()
            .find(|m| m.class == class)
            .map(|m| m.recall)
    }
}

/// Argmax prediction for every sample.
pub fn evaluate(model: &Model<f32>, set: &[Labeled]) -> Result<EvalReport> {
    if set.is_empty() {
        return Err(Error::invalid("cannot evaluate an empty set"));
    }
    let pairs = set
        .iter()
        .map(|s| {
            if s.input.shape() != model.spec().input_shape {
                return Err(Error::invalid(format!(
                    "sample shape {:?} does not match model input {:?}",
                    s.input.shape(),
                    model.spec().input_shape
                )));
            }
            let probs = model.probabilities(&to_real(&s.input))?;
            Ok((s.class, model.classes()[argmax(&probs)]))
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_pairs(model.classes(), &pairs)
}
