//! Generalization certificates for convex surrogates over the hull of the training inputs.
//!
//! Given support data `(bᵢ, zᵢ, yᵢ)` of a convex function, the lower envelope
//! `č(b) = maxᵢ zᵢ + yᵢᵀ(b − bᵢ)` and the upper envelope
//! `ĥ(b) = min { Σλᵢzᵢ : λ ≥ 0, Σλᵢ = 1, Σλᵢbᵢ = b }` sandwich the function on
//! `ℬ = conv{bᵢ}`. Two convex functions known only through their envelopes
//! can then differ at `b` by at most `max(ĥ_f − č_Φ, ĥ_Φ − č_f)`.
//!
//! When a convex model reproduces every value and gradient exactly, the
//! deviation is bounded in closed form by `maxᵢ ‖yᵢ‖₂ · diam(ℬ)`.

mod exact;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{Dataset, Split};
use crate::icnn::{IcnnError, IcnnModel};
use crate::lp::{solve_with, LinearProgram, LpError, LpStatus, RowKind, SolverOptions};

pub use exact::exact_1d_gap;

pub const CERTIFICATE_VERSION: u32 = 1;
/// Above this many points the diameter falls back to the bounding-box diagonal.
pub const EXACT_DIAMETER_LIMIT: usize = 5000;

#[derive(Debug, Error, PartialEq)]
pub enum CertifyError {
    #[error("no support points")]
    Empty,
    #[error("support point {index} has dimension {got}, expected {expected}")]
    Dimension { index: usize, got: usize, expected: usize },
    #[error("the two data sets do not share their support points (first difference at {0})")]
    Mismatch(usize),
    #[error("exact mode needs one-dimensional inputs, got {0}")]
    NotOneDimensional(usize),
    #[error("non-finite support data at point {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Model(#[from] IcnnError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("hull program ended with status {0:?}")]
    Solver(LpStatus),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub b: Vec<f64>,
    pub value: f64,
    /// A subgradient at `b`.
    pub grad: Vec<f64>,
}

/// Support data defining the lower and upper envelopes of a convex function.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopePair {
    points: Vec<SupportPoint>,
    dim: usize,
}

impl EnvelopePair {
    pub fn new(points: Vec<SupportPoint>) -> Result<Self, CertifyError> {
        let dim = points.first().ok_or(CertifyError::Empty)?.b.len();
        for (index, p) in points.iter().enumerate() {
            for got in [p.b.len(), p.grad.len()] {
                if got != dim {
                    return Err(CertifyError::Dimension { index, got, expected: dim });
                }
            }
            if !p.value.is_finite() || p.b.iter().chain(&p.grad).any(|v| !v.is_finite()) {
                return Err(CertifyError::NonFinite(index));
            }
        }
        Ok(Self { points, dim })
    }

    /// Support data of a model at the given inputs.
    pub fn from_model(model: &IcnnModel, inputs: &[Vec<f64>]) -> Result<Self, CertifyError> {
        let points = inputs
            .iter()
            .map(|b| {
                let (value, grad) = model.value_and_gradient(b)?;
                Ok(SupportPoint { b: b.clone(), value, grad })
            })
            .collect::<Result<Vec<_>, CertifyError>>()?;
        Self::new(points)
    }

    /// Labeled optimal values and duals of one split.
    pub fn from_dataset(d: &Dataset, which: Split) -> Result<Self, CertifyError> {
        let points = d
            .split(which)
            .into_iter()
            .map(|s| SupportPoint {
                b: s.input(),
                value: s.z.expect("split samples are optimal"),
                grad: s.y.clone().expect("split samples are optimal"),
            })
            .collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[SupportPoint] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inputs(&self) -> Vec<&[f64]> {
        self.points.iter().map(|p| p.b.as_slice()).collect()
    }

    /// Restriction to the points selected by `keep`.
    pub fn subset(&self, keep: impl Fn(&SupportPoint) -> bool) -> Result<Self, CertifyError> {
        Self::new(self.points.iter().filter(|p| keep(p)).cloned().collect())
    }
}

/// `č(b)`: the largest supporting hyperplane value at `b`.
pub fn lower_env(env: &EnvelopePair, b: &[f64]) -> f64 {
    env.points
        .iter()
        .map(|p| p.value + p.grad.iter().zip(b.iter().zip(&p.b)).map(|(g, (x, xi))| g * (x - xi)).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `ĥ(b)`, or `None` when `b` lies outside the convex hull of the support points.
const ACCEPT_RESIDUAL: f64 = 1e-8;

pub fn upper_env(env: &EnvelopePair, b: &[f64]) -> Result<Option<f64>, CertifyError> {
    if b.len() != env.dim {
        return Err(CertifyError::Dimension { index: 0, got: b.len(), expected: env.dim });
    }
    let n = env.points.len();
    let mut lp = LinearProgram::new(n);
    for (i, p) in env.points.iter().enumerate() {
        lp.objective[i] = p.value;
    }
    lp.add_row((0..n).map(|i| (i, 1.0)).collect(), RowKind::Eq, 1.0);
    for (j, &bj) in b.iter().enumerate() {
        let coeffs = env.points.iter().enumerate().filter(|(_, p)| p.b[j] != 0.0).map(|(i, p)| (i, p.b[j])).collect();
        lp.add_row(coeffs, RowKind::Eq, bj);
    }
    let opts = SolverOptions { tol: 1e-10, max_iter: 300, ..Default::default() };
    let sol = solve_with(&lp, &opts)?;
    let r = sol.residuals;
    match sol.status {
        LpStatus::Optimal => Ok(Some(sol.objective)),
        // near-vertex queries can stall just short of the tolerance
        LpStatus::IterationLimit if r.primal.max(r.dual).max(r.gap) <= ACCEPT_RESIDUAL => Ok(Some(sol.objective)),
        LpStatus::Infeasible => Ok(None),
        other => Err(CertifyError::Solver(other)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    Theorem1Sampled,
    Theorem1Exact1d,
    Theorem2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiameterMode {
    ExactPairwise,
    BoundingBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diameter {
    pub value: f64,
    pub mode: DiameterMode,
}

/// Largest pairwise distance for up to [`EXACT_DIAMETER_LIMIT`] points,
/// otherwise the bounding-box diagonal (never smaller than the true diameter).
pub fn diam_upper(points: &[&[f64]]) -> Diameter {
    if points.len() > EXACT_DIAMETER_LIMIT {
        return Diameter { value: bounding_box_diagonal(points), mode: DiameterMode::BoundingBox };
    }
    let best = (0..points.len())
        .into_par_iter()
        .map(|i| {
            points[i + 1..]
                .iter()
                .map(|q| points[i].iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Diameter { value: best.sqrt(), mode: DiameterMode::ExactPairwise }
}

pub fn bounding_box_diagonal(points: &[&[f64]]) -> f64 {
    let Some(first) = points.first() else { return 0.0 };
    (0..first.len())
        .map(|j| {
            let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[j]), hi.max(p[j])));
            (hi - lo) * (hi - lo)
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResiduals {
    /// `maxᵢ |f(bᵢ) − zᵢ|`
    pub value: f64,
    /// `maxᵢ ‖∇f(bᵢ) − yᵢ‖₂`
    pub gradient: f64,
}

fn residuals(f: &EnvelopePair, phi: &EnvelopePair) -> Result<FitResiduals, CertifyError> {
    if f.points.len() != phi.points.len() {
        return Err(CertifyError::Mismatch(f.points.len().min(phi.points.len())));
    }
    let mut r = FitResiduals { value: 0.0, gradient: 0.0 };
    for (i, (p, q)) in f.points.iter().zip(&phi.points).enumerate() {
        if p.b != q.b {
            return Err(CertifyError::Mismatch(i));
        }
        r.value = r.value.max((p.value - q.value).abs());
        let g = p.grad.iter().zip(&q.grad).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        r.gradient = r.gradient.max(g);
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub schema_version: u32,
    pub kind: CertificateKind,
    pub bound: f64,
    pub residuals: FitResiduals,
    pub diameter: Option<Diameter>,
    /// `maxᵢ ‖yᵢ‖₂` for the closed-form bound.
    pub max_dual_norm: Option<f64>,
    pub fit_tol: Option<f64>,
    /// False when the perfect-fit preconditions of the closed-form bound fail.
    pub binding: bool,
    pub support_points: usize,
    /// Points at which the envelope gap was evaluated.
    pub evaluated_points: usize,
    pub seed: Option<u64>,
    /// Where the largest envelope gap was found.
    pub witness: Option<Vec<f64>>,
}

impl BoundCertificate {
    pub fn to_json(&self) -> String {
        crate::jsonfmt::to_document(self).expect("certificate serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Theorem1Mode {
    /// All support points plus `samples` Dirichlet(1, …, 1) combinations of them.
    Sampled { samples: usize, seed: u64 },
    /// Exact supremum for one-dimensional inputs.
    Exact1d,
}

/// `max(ĥ_f − č_Φ, ĥ_Φ − č_f)` at `b`, or `None` outside the hull.
pub fn envelope_gap(f: &EnvelopePair, phi: &EnvelopePair, b: &[f64]) -> Result<Option<f64>, CertifyError> {
    let (Some(hf), Some(hp)) = (upper_env(f, b)?, upper_env(phi, b)?) else { return Ok(None) };
    Ok(Some((hf - lower_env(phi, b)).max(hp - lower_env(f, b))))
}

/// Dirichlet(1, …, 1) combinations of the support points, drawn sequentially from one stream
/// so that a longer run extends a shorter one.
pub fn hull_samples(env: &EnvelopePair, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = env.points.len();
    (0..count)
        .map(|_| {
            let w: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = w.iter().sum();
            let mut b = vec![0.0; env.dim];
            for (wi, p) in w.iter().zip(&env.points) {
                for (bj, pj) in b.iter_mut().zip(&p.b) {
                    *bj += wi / total * pj;
                }
            }
            b
        })
        .collect()
}

/// Envelope bound `M̂` between a model (`f`, its own values and gradients at the
/// support points) and the labeled data (`phi`). Sampled mode gives a lower
/// estimate of the supremum; exact mode returns it.
pub fn theorem1_bound(f: &EnvelopePair, phi: &EnvelopePair, mode: Theorem1Mode) -> Result<BoundCertificate, CertifyError> {
    let residuals = residuals(f, phi)?;
    let (kind, bound, evaluated, seed, witness) = match mode {
        Theorem1Mode::Exact1d => {
            let (bound, at, evaluated) = exact_1d_gap(f, phi)?;
            (CertificateKind::Theorem1Exact1d, bound, evaluated, None, vec![at])
        }
        Theorem1Mode::Sampled { samples, seed } => {
            let mut candidates: Vec<Vec<f64>> = phi.points.iter().map(|p| p.b.clone()).collect();
            candidates.extend(hull_samples(phi, samples, seed));
            let gaps = candidates
                .par_iter()
                .map(|b| envelope_gap(f, phi, b))
                .collect::<Result<Vec<_>, _>>()?;
            let mut best = (f64::NEG_INFINITY, 0);
            for (i, g) in gaps.iter().enumerate() {
                // hull samples can only leave the hull by rounding; skip those
                if let Some(g) = *g {
                    if g > best.0 {
                        best = (g, i);
                    }
                }
            }
            (CertificateKind::Theorem1Sampled, best.0, candidates.len(), Some(seed), candidates.swap_remove(best.1))
        }
    };
    Ok(BoundCertificate {
        schema_version: CERTIFICATE_VERSION,
        kind,
        bound,
        residuals,
        diameter: None,
        max_dual_norm: None,
        fit_tol: None,
        binding: true,
        support_points: phi.points.len(),
        evaluated_points: evaluated,
        seed,
        witness: Some(witness),
    })
}

/// Closed-form bound `maxᵢ ‖yᵢ‖₂ · diam(ℬ)`, binding only when the model fits
/// every value and gradient within `fit_tol`.
pub fn theorem2_bound(phi: &EnvelopePair, model: &IcnnModel, fit_tol: f64) -> Result<BoundCertificate, CertifyError> {
    let inputs: Vec<Vec<f64>> = phi.points.iter().map(|p| p.b.clone()).collect();
    let f = EnvelopePair::from_model(model, &inputs)?;
    let residuals = residuals(&f, phi)?;
    let max_dual_norm = phi
        .points
        .iter()
        .map(|p| p.grad.iter().map(|g| g * g).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let diameter = diam_upper(&phi.inputs());
    let binding = residuals.value <= fit_tol && residuals.gradient <= fit_tol;
    if !binding {
        log::warn!(
            "perfect-fit preconditions fail (value residual {:e}, gradient residual {:e}, tolerance {fit_tol:e}); the bound is not certified",
            residuals.value,
            residuals.gradient
        );
    }
    Ok(BoundCertificate {
        schema_version: CERTIFICATE_VERSION,
        kind: CertificateKind::Theorem2,
        bound: max_dual_norm * diameter.value,
        residuals,
        diameter: Some(diameter),
        max_dual_norm: Some(max_dual_norm),
        fit_tol: Some(fit_tol),
        binding,
        support_points: phi.points.len(),
        evaluated_points: 0,
        seed: None,
        witness: None,
    })
}
