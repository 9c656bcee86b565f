//! Optimality-gap metrics and report rendering.
//!
//! The relative gap of a prediction `z̃` against the optimum `z*` is
//! `(z̃ − z*)/|z*|`; positive values are over-estimates. Averages are geometric
//! means, with every gap floored at [`GAP_FLOOR`] so that exact predictions
//! do not collapse the product to zero.

mod render;

use serde::Serialize;
use thiserror::Error;

use crate::datagen::{Dataset, Split};
use crate::icnn::{IcnnError, IcnnModel};
use crate::opf::FormulationKind;

pub use render::{histogram, render_report, Histogram, ReportBundle};

pub const GAP_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("relative gap is undefined for a zero optimal value (sample {0})")]
    UndefinedGap(usize),
    #[error("the {0} split is empty")]
    EmptySplit(Split),
    #[error("model takes {model} inputs but the dataset provides {data}")]
    Dimension { model: usize, data: usize },
    #[error(transparent)]
    Model(#[from] IcnnError),
}

/// Signed and absolute relative gap of `pred` against `truth`.
pub fn gap(pred: f64, truth: f64) -> Result<(f64, f64), EvalError> {
    if truth == 0.0 {
        return Err(EvalError::UndefinedGap(0));
    }
    let signed = (pred - truth) / truth.abs();
    Ok((signed, signed.abs()))
}

/// Geometric mean of nonnegative values, each floored at [`GAP_FLOOR`]. NaN for an empty slice.
pub fn geo_mean(gaps: &[f64]) -> f64 {
    if gaps.is_empty() {
        return f64::NAN;
    }
    let logs: f64 = gaps.iter().map(|g| g.max(GAP_FLOOR).ln()).sum();
    (logs / gaps.len() as f64).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRecord {
    pub id: usize,
    pub z_true: f64,
    pub z_pred: f64,
    pub gap_signed: f64,
    pub gap_abs: f64,
    pub total_load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub model: String,
    pub system: String,
    pub formulation: FormulationKind,
    pub count: usize,
    /// Geometric mean of the absolute gaps (a fraction, not percent).
    pub mean_gap: f64,
    pub worst_gap: f64,
    pub floor: f64,
    /// Number of gaps that were raised to the floor.
    pub floored: usize,
}

/// Builds records from `(id, z_true, z_pred, total_load)` tuples.
pub fn records_from(rows: impl IntoIterator<Item = (usize, f64, f64, f64)>) -> Result<Vec<GapRecord>, EvalError> {
    rows.into_iter()
        .map(|(id, z_true, z_pred, total_load)| {
            let (gap_signed, gap_abs) = gap(z_pred, z_true).map_err(|_| EvalError::UndefinedGap(id))?;
            Ok(GapRecord { id, z_true, z_pred, gap_signed, gap_abs, total_load })
        })
        .collect()
}

pub fn summarize(model: &str, system: &str, formulation: FormulationKind, records: &[GapRecord]) -> EvalSummary {
    let gaps: Vec<f64> = records.iter().map(|r| r.gap_abs).collect();
    EvalSummary {
        model: model.to_string(),
        system: system.to_string(),
        formulation,
        count: records.len(),
        mean_gap: geo_mean(&gaps),
        worst_gap: gaps.iter().copied().fold(0.0, f64::max),
        floor: GAP_FLOOR,
        floored: gaps.iter().filter(|&&g| g < GAP_FLOOR).count(),
    }
}

/// Evaluates `model` on one split of `dataset`.
pub fn evaluate(model: &IcnnModel, label: &str, dataset: &Dataset, which: Split) -> Result<(EvalSummary, Vec<GapRecord>), EvalError> {
    let samples = dataset.split(which);
    let first = samples.first().ok_or(EvalError::EmptySplit(which))?;
    let dim = first.input().len();
    if dim != model.input_dim() {
        return Err(EvalError::Dimension { model: model.input_dim(), data: dim });
    }
    let mut rows = Vec::with_capacity(samples.len());
    for s in &samples {
        let z = s.z.expect("split samples are optimal");
        rows.push((s.id, z, model.forward(&s.input())?, s.total_load()));
    }
    let records = records_from(rows)?;
    let formulation = dataset.formulation().unwrap_or(FormulationKind::Dc);
    Ok((summarize(label, &dataset.header.case, formulation, &records), records))
}

#[cfg(test)]
mod tests;
