//! Mini-batch Adam training with a step learning-rate schedule.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::model::{Architecture, CqiScaler, CvaeModel, LossTerms, TrainingRecord};
use crate::rng::{child_rng, rng_from_seed};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainHyper {
    pub learning_rate: f64,
    /// Epochs (0-based) at whose start the rate is multiplied by `lr_decay_factor`.
    pub lr_decay_epochs: Vec<usize>,
    pub lr_decay_factor: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub kl_weight: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub rng_seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            lr_decay_epochs: vec![3, 7],
            lr_decay_factor: 0.1,
            epochs: 10,
            batch_size: 64,
            kl_weight: 1.0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            rng_seed: 0,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("lr_decay_factor", self.lr_decay_factor),
            ("adam_eps", self.adam_eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.kl_weight >= 0.0 && self.kl_weight.is_finite()) {
            return Err(Error::Config("kl_weight must be nonnegative".into()));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1)")));
            }
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let decays = self.lr_decay_epochs.iter().filter(|&&e| epoch >= e).count();
        self.learning_rate * self.lr_decay_factor.powi(decays as i32)
    }
}

/// Per-epoch batch-averaged losses.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<LossTerms>,
}

impl TrainHistory {
    pub fn last(&self) -> Option<LossTerms> {
        self.epochs.last().copied()
    }
}

pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, hyper: &TrainHyper) -> Self {
        Self {
            beta1: hyper.adam_beta1,
            beta2: hyper.adam_beta2,
            eps: hyper.adam_eps,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

/// Trains a fresh model of the given architecture.
pub fn train_cvae(
    records: &[TrainingRecord],
    arch: &Architecture,
    hyper: &TrainHyper,
) -> Result<(CvaeModel, TrainHistory)> {
    hyper.validate()?;
    let first = records.first().ok_or(Error::Empty("training set is empty"))?;
    let mut init_rng = child_rng(hyper.rng_seed, "cvae-init", 0);
    let mut model = CvaeModel::new(&mut init_rng, first.h.len(), arch)?;
    model.cqi = CqiScaler::fit(records.iter().map(|r| r.eta));
    let history = train_model(&mut model, records, hyper)?;
    Ok((model, history))
}

/// Continues training an existing model in place.
pub fn train_model(model: &mut CvaeModel, records: &[TrainingRecord], hyper: &TrainHyper) -> Result<TrainHistory> {
    hyper.validate()?;
    if records.is_empty() {
        return Err(Error::Empty("training set is empty"));
    }
    if records.len() < hyper.batch_size {
        return Err(Error::Config(format!(
            "{} records is fewer than one batch of {}",
            records.len(),
            hyper.batch_size
        )));
    }
    if let Some(bad) = records.iter().find(|r| !(r.eta >= 0.0)) {
        return Err(Error::Domain(format!("CQI must be nonnegative, got {}", bad.eta)));
    }
    let mut rng = rng_from_seed(crate::rng::child_seed(hyper.rng_seed, "cvae-train", 0));
    let mut params = model.params();
    let mut adam = Adam::new(params.len(), hyper);
    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut history = TrainHistory::default();
    let n_batches = records.len() / hyper.batch_size;
    let mut batch = Vec::with_capacity(hyper.batch_size);

    for epoch in 0..hyper.epochs {
        let lr = hyper.learning_rate_at(epoch);
        order.shuffle(&mut rng);
        let mut acc = LossTerms {
            loss: 0.0,
            kl: 0.0,
            recon: 0.0,
        };
        for chunk in order.chunks_exact(hyper.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| records[i].clone()));
            let noise = DMatrix::from_fn(model.latent_dim, batch.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let pass = model.forward_train(&batch, &noise, hyper.kl_weight)?;
            if !pass.terms.loss.is_finite() {
                return Err(Error::Degenerate(format!("non-finite loss")).context(format!("epoch {epoch}")));
            }
            let grads = model.backward(&pass);
            model.update_running_stats(&pass);
            adam.step(&mut params, &grads, lr);
            model.set_params(&params)?;
            acc.loss += pass.terms.loss;
            acc.kl += pass.terms.kl;
            acc.recon += pass.terms.recon;
        }
        let nb = n_batches as f64;
        let terms = LossTerms {
            loss: acc.loss / nb,
            kl: acc.kl / nb,
            recon: acc.recon / nb,
        };
        log::debug!("epoch {epoch}: loss {:.5} kl {:.5} recon {:.5}", terms.loss, terms.kl, terms.recon);
        history.epochs.push(terms);
    }
    Ok(history)
}
