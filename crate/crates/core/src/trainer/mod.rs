//! Projected mini-batch training of ICNN and DNN surrogates.
//!
//! After every optimizer step the constrained weights of a convex model are
//! clamped at zero, which keeps the iterate inside the feasible set of the
//! projected gradient method. The learning rate decays exponentially per epoch
//! and is further cut when the validation loss plateaus. Training returns the
//! snapshot with the lowest validation loss.

mod config;
mod search;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{Dataset, Split};
use crate::icnn::{IcnnError, IcnnModel, Loss};

pub use search::{hyper_search, SearchResult, SearchSpace, Trial};

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("the {0} split is empty")]
    EmptySplit(Split),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("validation loss diverged at epoch {epoch}")]
    Divergence { epoch: usize, report: Box<TrainReport> },
    #[error(transparent)]
    Model(#[from] IcnnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    SgdMomentum,
    /// Adam with bias correction.
    AdaptiveMoments,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Squared,
    Asymmetric,
}

/// How nonnegativity of the convex weights is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Projection {
    /// Clamp the weights at zero after each step.
    Weights,
    /// Zero gradient components that would push a weight at zero below it, then clamp.
    GradientMask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    /// Momentum for SGD, first-moment decay for Adam.
    pub momentum: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Per-epoch multiplicative learning-rate decay.
    pub decay_rate: f64,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub early_stop_patience: usize,
    pub loss: LossKind,
    pub kappa_under: f64,
    pub kappa_over: f64,
    pub seed: u64,
    pub projection: Projection,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::AdaptiveMoments,
            learning_rate: 1e-3,
            momentum: 0.9,
            beta2: 0.999,
            batch_size: 32,
            max_epochs: 200,
            decay_rate: 0.99,
            plateau_patience: 10,
            plateau_factor: 0.5,
            early_stop_patience: 30,
            loss: LossKind::Squared,
            kappa_under: 1.0,
            kappa_over: 1.0,
            seed: 0,
            projection: Projection::Weights,
        }
    }
}

impl TrainConfig {
    pub fn loss_fn(&self) -> Loss {
        match self.loss {
            LossKind::Squared => Loss::Squared,
            LossKind::Asymmetric => Loss::Asymmetric { kappa_under: self.kappa_under, kappa_over: self.kappa_over },
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        let positive = [
            ("learning_rate", self.learning_rate),
            ("decay_rate", self.decay_rate),
            ("plateau_factor", self.plateau_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("momentum", self.momentum), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1), got {v}"));
            }
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.plateau_patience == 0 || self.early_stop_patience == 0 {
            return bad("patience values must be at least 1".into());
        }
        if !(self.kappa_under >= 0.0 && self.kappa_over >= 0.0) {
            return bad(format!("kappa values must be nonnegative, got ({}, {})", self.kappa_under, self.kappa_over));
        }
        Ok(())
    }
}

/// Inputs and raw targets of one split.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainData {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl TrainData {
    pub fn from_split(d: &Dataset, which: Split) -> Self {
        let samples = d.split(which);
        Self {
            inputs: samples.iter().map(|s| s.input()).collect(),
            targets: samples.iter().map(|s| s.z.expect("split samples are optimal")).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn batch(&self, idx: &[usize]) -> Vec<(&[f64], f64)> {
        idx.iter().map(|&i| (self.inputs[i].as_slice(), self.targets[i])).collect()
    }

    pub fn all(&self) -> Vec<(&[f64], f64)> {
        self.inputs.iter().map(Vec::as_slice).zip(self.targets.iter().copied()).collect()
    }

    pub fn input_refs(&self) -> Vec<&[f64]> {
        self.inputs.iter().map(Vec::as_slice).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch of the returned snapshot; 0 is the untrained model.
    pub best_epoch: usize,
    pub best_valid_loss: f64,
    pub initial_valid_loss: f64,
}

impl TrainReport {
    /// Training log with header `epoch,train_loss,valid_loss,lr,seconds`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,valid_loss,lr,seconds\n");
        for e in &self.epochs {
            s.push_str(&format!("{},{:e},{:e},{:e},{:.6}\n", e.epoch, e.train_loss, e.valid_loss, e.lr, e.seconds));
        }
        s
    }
}

/// κ_over·r² for `r > 0`, κ_under·r² otherwise.
pub fn asymmetric_loss(residual: f64, kappa_under: f64, kappa_over: f64) -> f64 {
    Loss::Asymmetric { kappa_under, kappa_over }.value(residual)
}

enum OptState {
    Sgd { velocity: Vec<f64> },
    Adam { m: Vec<f64>, v: Vec<f64>, t: i32 },
}

impl OptState {
    fn new(kind: Optimizer, n: usize) -> Self {
        match kind {
            Optimizer::SgdMomentum => OptState::Sgd { velocity: vec![0.0; n] },
            Optimizer::AdaptiveMoments => OptState::Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0 },
        }
    }

    fn step(&mut self, cfg: &TrainConfig, lr: f64, params: &mut [f64], grad: &[f64]) {
        match self {
            OptState::Sgd { velocity } => {
                for ((p, vel), g) in params.iter_mut().zip(velocity.iter_mut()).zip(grad) {
                    *vel = cfg.momentum * *vel - lr * g;
                    *p += *vel;
                }
            }
            OptState::Adam { m, v, t } => {
                *t += 1;
                let c1 = 1.0 - cfg.momentum.powi(*t);
                let c2 = 1.0 - cfg.beta2.powi(*t);
                for (((p, mi), vi), g) in params.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(grad) {
                    *mi = cfg.momentum * *mi + (1.0 - cfg.momentum) * g;
                    *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * g * g;
                    *p -= lr * (*mi / c1) / ((*vi / c2).sqrt() + 1e-8);
                }
            }
        }
    }
}

/// Trains on the train and valid splits of a labeled dataset.
pub fn train(model: &IcnnModel, dataset: &Dataset, cfg: &TrainConfig) -> Result<(IcnnModel, TrainReport), TrainError> {
    train_on(model, &TrainData::from_split(dataset, Split::Train), &TrainData::from_split(dataset, Split::Valid), cfg)
}

pub fn train_on(
    model: &IcnnModel,
    train: &TrainData,
    valid: &TrainData,
    cfg: &TrainConfig,
) -> Result<(IcnnModel, TrainReport), TrainError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptySplit(Split::Train));
    }
    if valid.is_empty() {
        return Err(TrainError::EmptySplit(Split::Valid));
    }
    let loss = cfg.loss_fn();
    let valid_batch = valid.all();
    let initial = model.loss(&valid_batch, loss)?;
    let mut report = TrainReport { epochs: Vec::new(), best_epoch: 0, best_valid_loss: initial, initial_valid_loss: initial };
    let mut best = model.clone();
    let mut current = model.clone();
    let mut params = current.params();
    let mask = current.convex_mask();
    let mut opt = OptState::new(cfg.optimizer, params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut plateau_scale = 1.0;
    let mut since_best = 0;
    let mut since_plateau = 0;
    let mut plateau_best = initial;
    let start = Instant::now();

    for epoch in 1..=cfg.max_epochs {
        let lr = cfg.learning_rate * cfg.decay_rate.powi(epoch as i32 - 1) * plateau_scale;
        order.shuffle(&mut rng);
        let mut train_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = train.batch(chunk);
            let (l, mut grad) = current.param_gradients(&batch, loss)?;
            train_loss += l * chunk.len() as f64;
            if cfg.projection == Projection::GradientMask && current.is_convex() {
                for ((g, &c), p) in grad.iter_mut().zip(&mask).zip(&params) {
                    if c && *p <= 0.0 && *g > 0.0 {
                        *g = 0.0;
                    }
                }
            }
            opt.step(cfg, lr, &mut params, &grad);
            if current.is_convex() {
                for (p, &c) in params.iter_mut().zip(&mask) {
                    if c && *p < 0.0 {
                        *p = 0.0;
                    }
                }
            }
            current.set_params(&params)?;
        }
        let valid_loss = current.loss(&valid_batch, loss)?;
        report.epochs.push(EpochRecord {
            epoch,
            train_loss: train_loss / train.len() as f64,
            valid_loss,
            lr,
            seconds: start.elapsed().as_secs_f64(),
        });
        if !valid_loss.is_finite() {
            return Err(TrainError::Divergence { epoch, report: Box::new(report) });
        }
        if valid_loss < report.best_valid_loss {
            report.best_valid_loss = valid_loss;
            report.best_epoch = epoch;
            best = current.clone();
            since_best = 0;
        } else {
            since_best += 1;
        }
        if valid_loss < plateau_best {
            plateau_best = valid_loss;
            since_plateau = 0;
        } else {
            since_plateau += 1;
            if since_plateau >= cfg.plateau_patience {
                plateau_scale *= cfg.plateau_factor;
                since_plateau = 0;
            }
        }
        log::debug!("epoch {epoch}: train {:.3e} valid {valid_loss:.3e} lr {lr:.2e}", train_loss / train.len() as f64);
        if since_best >= cfg.early_stop_patience {
            break;
        }
    }
    Ok((best, report))
}
