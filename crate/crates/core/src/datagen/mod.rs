//! Instance sampling, labeling and dataset persistence.
//!
//! Loads are drawn as `p^d = α · η ⊙ p^d_ref`, with one global factor
//! `α ~ U(α_min, α_max)` and an independent log-normal `η_i` (mean 1) per bus.
//! The same `η_i` scales reactive demand, so power factors are preserved.

mod io;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::grid::PowerNetwork;
use crate::lp::{value_and_gradient, LpStatus};
use crate::opf::{FormulationKind, OpfError};

pub use io::{import_labeled, write_dataset};

pub const DATASET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("all {0} instances are infeasible")]
    AllInfeasible(usize),
    #[error("{samples} samples cannot fill {splits} non-empty splits")]
    TooFewSamples { samples: usize, splits: usize },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Opf(#[from] OpfError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Standard deviation of the per-bus log-normal factor (its mean is 1).
    pub eta_std: f64,
    pub seed: u64,
    pub count: usize,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self { alpha_min: 0.80, alpha_max: 1.065, eta_std: 0.05, seed: 0, count: 1000 }
    }
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        if !(self.alpha_min > 0.0 && self.alpha_min <= self.alpha_max && self.alpha_max.is_finite()) {
            return Err(DataError::Config(format!(
                "need 0 < alpha_min <= alpha_max, got [{}, {}]",
                self.alpha_min, self.alpha_max
            )));
        }
        if !(self.eta_std >= 0.0 && self.eta_std.is_finite()) {
            return Err(DataError::Config(format!("eta_std must be >= 0, got {}", self.eta_std)));
        }
        Ok(())
    }
}

/// Parameters `(μ, σ)` of the underlying normal for a log-normal with mean 1 and
/// standard deviation `std`.
pub fn lognormal_params(std: f64) -> (f64, f64) {
    let sigma = (1.0 + std * std).ln().sqrt();
    (-0.5 * sigma * sigma, sigma)
}

/// Seed of instance `index`, derived by hashing so that instances can be drawn in any order.
pub fn instance_seed(base_seed: u64, index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(b"instance");
    h.update(base_seed.to_le_bytes());
    h.update((index as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadDraw {
    pub seed: u64,
    pub alpha: f64,
    pub eta: Vec<f64>,
    pub pd: Vec<f64>,
    pub qd: Vec<f64>,
}

pub fn sample_loads(net: &PowerNetwork, cfg: &PerturbationConfig, index: usize) -> LoadDraw {
    let seed = instance_seed(cfg.seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = if cfg.alpha_max > cfg.alpha_min { rng.random_range(cfg.alpha_min..=cfg.alpha_max) } else { cfg.alpha_min };
    let eta: Vec<f64> = if cfg.eta_std > 0.0 {
        let (mu, sigma) = lognormal_params(cfg.eta_std);
        let dist = LogNormal::new(mu, sigma).expect("finite log-normal parameters");
        (0..net.loads.len()).map(|_| dist.sample(&mut rng)).collect()
    } else {
        vec![1.0; net.loads.len()]
    };
    let pd = net.loads.iter().zip(&eta).map(|(l, e)| alpha * e * l.p).collect();
    let qd = net.loads.iter().zip(&eta).map(|(l, e)| alpha * e * l.q).collect();
    LoadDraw { seed, alpha, eta, pd, qd }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One solved (or rejected) OPF instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub id: usize,
    pub seed: u64,
    pub alpha: f64,
    pub formulation: FormulationKind,
    pub pd: Vec<f64>,
    pub qd: Option<Vec<f64>>,
    pub z: Option<f64>,
    /// Gradient of the value function with respect to [`LabeledSample::input`].
    pub y: Option<Vec<f64>>,
    pub status: LpStatus,
    pub split: Option<Split>,
}

impl LabeledSample {
    /// Value-function argument: `p^d` for DC, `(p^d, q^d)` otherwise.
    pub fn input(&self) -> Vec<f64> {
        let mut b = self.pd.clone();
        if self.formulation != FormulationKind::Dc {
            b.extend(self.qd.iter().flatten());
        }
        b
    }

    pub fn total_load(&self) -> f64 {
        self.pd.iter().sum()
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema_version: u32,
    pub case: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn split(&self, which: Split) -> Vec<&LabeledSample> {
        self.samples.iter().filter(|s| s.split == Some(which)).collect()
    }

    pub fn feasible(&self) -> impl Iterator<Item = &LabeledSample> {
        self.samples.iter().filter(|s| s.is_optimal())
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.feasible().next().map(|s| s.input().len())
    }

    pub fn formulation(&self) -> Option<FormulationKind> {
        self.samples.first().map(|s| s.formulation)
    }
}

/// Summary of a generation run, including the extreme untruncated `η` draws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationStats {
    pub feasible: usize,
    pub infeasible: usize,
    pub eta_min: f64,
    pub eta_max: f64,
}

/// Hash over the network and the configuration, identifying a generated dataset.
pub fn config_hash(net: &PowerNetwork, cfg: &PerturbationConfig) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(net).expect("network serializes"));
    h.update(serde_json::to_vec(cfg).expect("config serializes"));
    hex::encode(h.finalize())
}

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.4, 0.3, 0.3];

pub fn generate(net: &PowerNetwork, cfg: &PerturbationConfig) -> Result<Dataset, DataError> {
    generate_with_stats(net, cfg).map(|(d, _)| d)
}

pub fn generate_with_stats(net: &PowerNetwork, cfg: &PerturbationConfig) -> Result<(Dataset, GenerationStats), DataError> {
    cfg.validate()?;
    let solved: Vec<Result<(LabeledSample, f64, f64), OpfError>> = (0..cfg.count)
        .into_par_iter()
        .map(|index| {
            let draw = sample_loads(net, cfg, index);
            let value = value_and_gradient(net, &draw.pd)?;
            let optimal = value.is_optimal();
            let (lo, hi) = draw.eta.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
            let sample = LabeledSample {
                id: index,
                seed: draw.seed,
                alpha: draw.alpha,
                formulation: FormulationKind::Dc,
                pd: draw.pd,
                qd: None,
                z: optimal.then_some(value.z),
                y: optimal.then_some(value.y),
                status: value.status,
                split: None,
            };
            Ok((sample, lo, hi))
        })
        .collect();
    let mut samples = Vec::with_capacity(cfg.count);
    let mut stats = GenerationStats { feasible: 0, infeasible: 0, eta_min: f64::INFINITY, eta_max: f64::NEG_INFINITY };
    for r in solved {
        let (s, lo, hi) = r?;
        stats.eta_min = stats.eta_min.min(lo);
        stats.eta_max = stats.eta_max.max(hi);
        if s.is_optimal() {
            stats.feasible += 1;
        } else {
            stats.infeasible += 1;
        }
        samples.push(s);
    }
    if stats.feasible == 0 {
        return Err(DataError::AllInfeasible(cfg.count));
    }
    let header = DatasetHeader { schema_version: DATASET_SCHEMA_VERSION, case: net.name.clone(), config_hash: config_hash(net, cfg) };
    let dataset = split(Dataset { header, samples }, DEFAULT_FRACTIONS, cfg.seed)?;
    Ok((dataset, stats))
}

/// Split sizes by largest remainder; ties go to the earlier split.
pub fn split_counts(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts = [0usize; 3];
    if !fractions.iter().any(|&f| f > 0.0) {
        return counts;
    }
    for k in 0..3 {
        counts[k] = exact[k].floor() as usize;
    }
    let mut left = n - counts.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if fractions[k] > 0.0 {
            counts[k] += 1;
            left -= 1;
        }
    }
    counts
}

/// Assigns train/valid/test to the feasible samples by a seeded shuffle;
/// infeasible samples are left unassigned.
pub fn split(mut dataset: Dataset, fractions: [f64; 3], seed: u64) -> Result<Dataset, DataError> {
    if fractions.iter().any(|f| !(*f >= 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(DataError::Config(format!("split fractions {fractions:?} must be nonnegative and sum to 1")));
    }
    let mut feasible: Vec<usize> = (0..dataset.samples.len()).filter(|&i| dataset.samples[i].is_optimal()).collect();
    let wanted = fractions.iter().filter(|&&f| f > 0.0).count();
    if feasible.len() < wanted {
        return Err(DataError::TooFewSamples { samples: feasible.len(), splits: wanted });
    }
    let counts = split_counts(feasible.len(), fractions);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    feasible.shuffle(&mut rng);
    for s in &mut dataset.samples {
        s.split = None;
    }
    let mut it = feasible.into_iter();
    for (k, &c) in counts.iter().enumerate() {
        for i in it.by_ref().take(c) {
            dataset.samples[i].split = Some(Split::ALL[k]);
        }
    }
    Ok(dataset)
}
