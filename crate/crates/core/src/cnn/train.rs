use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dsp::InputTensor;
use crate::error::{Error, Result};
use crate::rng;
use crate::signal::FaultClass;

use super::model::{argmax, to_real, Grads, Model, Tensor};
use super::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 16,
            epochs: 30,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        Ok(())
    }
}

/// Classic momentum SGD: `v <- mu v - lr g; p <- p + v`.
#[derive(Debug, Clone)]
pub struct Sgd<T: Real> {
    velocity: Vec<Tensor<T>>,
    learning_rate: T,
    momentum: T,
}

impl<T: Real> Sgd<T> {
    pub fn new(model: &Model<T>, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            velocity: model
                .params()
                .iter()
                .map(|p| Tensor::zeros(p.shape.clone()))
                .collect(),
            learning_rate: T::from_f64(config.learning_rate).expect("finite learning rate"),
            momentum: T::from_f64(config.momentum).expect("finite momentum"),
        })
    }

    pub fn velocity(&self) -> &[Tensor<T>] {
        &self.velocity
    }

    pub fn step(&mut self, model: &mut Model<T>, grads: &Grads<T>) -> Result<()> {
        if grads.len() != self.velocity.len()
            || grads
                .iter()
                .zip(&self.velocity)
                .any(|(g, v)| g.shape != v.shape)
        {
            return Err(Error::invalid(
                "gradient shapes do not match the model parameters",
            ));
        }
        for ((p, v), g) in model
            .params_mut()
            .iter_mut()
            .zip(&mut self.velocity)
            .zip(grads)
        {
            for ((pv, vv), &gv) in p.values.iter_mut().zip(&mut v.values).zip(&g.values) {
                *vv = self.momentum * *vv - self.learning_rate * gv;
                *pv += *vv;
            }
        }
        Ok(())
    }
}

/// A preprocessed input with its true class.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeled {
    pub input: InputTensor,
    pub class: FaultClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot with the best validation accuracy (lower validation loss
    /// breaks ties).
    pub model: Model<f32>,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
}

fn encode(model: &Model<f32>, set: &[Labeled]) -> Result<(Vec<Vec<f32>>, Vec<usize>)> {
    let mut inputs = Vec::with_capacity(set.len());
    let mut labels = Vec::with_capacity(set.len());
    for s in set {
        if s.input.shape() != model.spec().input_shape {
            return Err(Error::invalid(format!(
                "sample shape {:?} does not match model input {:?}",
                s.input.shape(),
                model.spec().input_shape
            )));
        }
        let label = model.spec().class_index(s.class).ok_or_else(|| {
            Error::invalid(format!(
                "class {} is not in the model's class list",
                s.class
            ))
        })?;
        inputs.push(to_real(&s.input));
        labels.push(label);
    }
    Ok((inputs, labels))
}

/// Mean loss and accuracy of `model` over encoded samples.
fn measure(model: &Model<f32>, inputs: &[Vec<f32>], labels: &[usize]) -> (f64, f64) {
    let mut loss = 0.0;
    let mut correct = 0;
    for (x, &y) in inputs.iter().zip(labels) {
        let p = model.probabilities(x).expect("shape checked");
        loss -= p[y].max(1e-300).ln();
        if argmax(&p) == y {
            correct += 1;
        }
    }
    let n = inputs.len() as f64;
    (loss / n, correct as f64 / n)
}

/// Minibatch momentum SGD with per-epoch seeded shuffling.
pub fn train(
    mut model: Model<f32>,
    train_set: &[Labeled],
    val_set: &[Labeled],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with_progress(&mut model, train_set, val_set, config, |_| {})
}

pub fn train_with_progress(
    model: &mut Model<f32>,
    train_set: &[Labeled],
    val_set: &[Labeled],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::invalid(
            "training and validation sets must be non-empty",
        ));
    }
    let mut opt = Sgd::new(model, config)?;
    let (train_x, train_y) = encode(model, train_set)?;
    let (val_x, val_y) = encode(model, val_set)?;
    let mut shuffle_rng = rng::seeded(rng::substream(config.seed, "shuffle"));
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, f64, usize, Model<f32>)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            let xs: Vec<&[f32]> = batch.iter().map(|&i| train_x[i].as_slice()).collect();
            let ys: Vec<usize> = batch.iter().map(|&i| train_y[i]).collect();
            // Running training accuracy uses the pre-update parameters.
            let (loss, grads, hits) = model.batch_pass(&xs, &ys)?;
            correct += hits;
            if !loss.is_finite() {
                return Err(Error::invalid(format!(
                    "training diverged at epoch {epoch}"
                )));
            }
            loss_sum += loss * batch.len() as f64;
            opt.step(model, &grads)?;
        }
        let (val_loss, val_acc) = measure(model, &val_x, &val_y);
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / train_x.len() as f64,
            train_acc: correct as f64 / train_x.len() as f64,
            val_loss,
            val_acc,
        };
        on_epoch(&stats);
        history.push(stats);
        let improves = match &best {
            None => true,
            Some((acc, loss, _, _)) => val_acc > *acc || (val_acc == *acc && val_loss < *loss),
        };
        if improves {
            best = Some((val_acc, val_loss, epoch, model.clone()));
        }
    }

    let (model, best_epoch) = match best {
        Some((_, _, epoch, m)) => (m, epoch),
        None => (model.clone(), 0),
    };
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
    })
}
