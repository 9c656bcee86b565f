//! Seeded random hyperparameter search scored by validation optimality gap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{train_on, TrainConfig, TrainData, TrainError};
use crate::evalkit::geo_mean;
use crate::icnn::{IcnnModel, NetConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchSpace {
    /// Learning-rate range, sampled log-uniformly.
    pub learning_rate: (f64, f64),
    pub decay_rate: (f64, f64),
    pub widths: Vec<usize>,
    pub depths: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    /// Settings not searched over.
    pub base: TrainConfig,
    pub convex: bool,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            learning_rate: (1e-4, 3e-2),
            decay_rate: (0.97, 1.0),
            widths: vec![16, 32, 64],
            depths: vec![1, 2, 3],
            batch_sizes: vec![16, 32, 64],
            base: TrainConfig::default(),
            convex: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trial {
    pub index: usize,
    pub net: NetConfig,
    pub config: TrainConfig,
    /// Geometric-mean relative gap on the validation split; NaN when training diverged.
    pub valid_gap: f64,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub best: Trial,
    /// All trials, best first.
    pub leaderboard: Vec<Trial>,
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, items: &[T]) -> T {
    items[rng.random_range(0..items.len())]
}

fn draw(space: &SearchSpace, input_dim: usize, rng: &mut ChaCha8Rng, index: usize) -> (NetConfig, TrainConfig) {
    let (lo, hi) = space.learning_rate;
    let lr = if hi > lo { rng.random_range(lo.ln()..hi.ln()).exp() } else { lo };
    let (dlo, dhi) = space.decay_rate;
    let decay = if dhi > dlo { rng.random_range(dlo..=dhi) } else { dlo };
    let width = pick(rng, &space.widths);
    let depth = pick(rng, &space.depths);
    let batch = pick(rng, &space.batch_sizes);
    let seed: u64 = rng.random();
    let net = NetConfig::new(input_dim, &vec![width; depth], space.convex, seed);
    let config = TrainConfig { learning_rate: lr, decay_rate: decay, batch_size: batch, seed: seed ^ index as u64, ..space.base.clone() };
    (net, config)
}

fn validation_gap(model: &IcnnModel, valid: &TrainData) -> f64 {
    let gaps: Vec<f64> = valid
        .inputs
        .iter()
        .zip(&valid.targets)
        .filter(|(_, &z)| z != 0.0)
        .map(|(x, &z)| model.forward(x).map_or(f64::NAN, |p| (p - z).abs() / z.abs()))
        .collect();
    if gaps.is_empty() || gaps.iter().any(|g| !g.is_finite()) {
        return f64::NAN;
    }
    geo_mean(&gaps)
}

/// Draws `budget` configurations, trains each (in parallel, each with its own
/// model and RNG) and ranks them by validation gap. Diverged trials rank last.
pub fn hyper_search(
    train: &TrainData,
    valid: &TrainData,
    space: &SearchSpace,
    budget: usize,
    seed: u64,
) -> Result<SearchResult, TrainError> {
    if budget == 0 {
        return Err(TrainError::Config("search budget must be at least 1".into()));
    }
    if space.widths.is_empty() || space.depths.is_empty() || space.batch_sizes.is_empty() {
        return Err(TrainError::Config("search space lists must be nonempty".into()));
    }
    let (lo, hi) = space.learning_rate;
    if !(lo > 0.0 && lo <= hi) {
        return Err(TrainError::Config(format!("learning-rate range ({lo}, {hi}) must be positive and ordered")));
    }
    let input_dim = train.inputs.first().ok_or(TrainError::EmptySplit(crate::datagen::Split::Train))?.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drawn: Vec<(NetConfig, TrainConfig)> = (0..budget).map(|i| draw(space, input_dim, &mut rng, i)).collect();
    let trials: Vec<Result<Trial, TrainError>> = drawn
        .into_par_iter()
        .enumerate()
        .map(|(index, (net, config))| {
            let mut model = IcnnModel::init(&net)?;
            model.standardize(&train.input_refs(), &train.targets)?;
            let (valid_gap, best_epoch) = match train_on(&model, train, valid, &config) {
                Ok((trained, report)) => (validation_gap(&trained, valid), report.best_epoch),
                Err(TrainError::Divergence { .. }) => (f64::NAN, 0),
                Err(e) => return Err(e),
            };
            Ok(Trial { index, net, config, valid_gap, best_epoch })
        })
        .collect();
    let mut leaderboard = trials.into_iter().collect::<Result<Vec<_>, _>>()?;
    let key = |t: &Trial| if t.valid_gap.is_nan() { f64::INFINITY } else { t.valid_gap };
    leaderboard.sort_by(|a, b| key(a).total_cmp(&key(b)).then(a.index.cmp(&b.index)));
    Ok(SearchResult { best: leaderboard[0].clone(), leaderboard })
}
