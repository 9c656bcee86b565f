//! Linear programming: problem representation, a primal-dual interior-point
//! solver, and a vertex-enumeration oracle for small problems.
//!
//! Dual values follow the sensitivity convention: `duals[i]` is the rate of
//! change of the optimal objective with respect to `rows[i].rhs`. Rows of kind
//! [`RowKind::Ge`] therefore carry nonnegative duals, [`RowKind::Le`] rows
//! nonpositive duals, and equality rows are free.

mod brute;
mod ipm;
mod standard;
mod value;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use brute::{brute_force_lp, BruteForceOutcome, BRUTE_FORCE_MAX_VARS};
pub use value::{value_and_gradient, value_and_gradient_with, DcValue};

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("row {row} references variable {col} but the program has {n} variables")]
    ColumnOutOfRange { row: usize, col: usize, n: usize },
    #[error("non-finite data in {0}")]
    NonFinite(String),
    #[error("vector {what} has length {got}, expected {expected}")]
    Dimension { what: &'static str, got: usize, expected: usize },
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("normal equations stayed singular after regularization")]
    Singular,
    #[error("brute force supports at most {max} variables, got {got}")]
    TooLarge { got: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Eq,
    Ge,
    Le,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
}

impl LpRow {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// `min cᵀx + offset` subject to sparse rows and variable bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub offset: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<LpRow>,
}

impl LinearProgram {
    /// `n` nonnegative variables with zero cost and no rows.
    pub fn new(n: usize) -> Self {
        Self {
            objective: vec![0.0; n],
            offset: 0.0,
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn set_free(&mut self, j: usize) {
        self.set_bounds(j, f64::NEG_INFINITY, f64::INFINITY);
    }

    /// Appends a row and returns its index.
    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, kind: RowKind, rhs: f64) -> usize {
        self.rows.push(LpRow { coeffs, kind, rhs });
        self.rows.len() - 1
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.offset + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn check(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        for (what, len) in [("lower", self.lower.len()), ("upper", self.upper.len())] {
            if len != n {
                return Err(LpError::Dimension { what, got: len, expected: n });
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) || !self.offset.is_finite() {
            return Err(LpError::NonFinite("objective".into()));
        }
        if self.lower.iter().chain(&self.upper).any(|b| b.is_nan())
            || self.lower.contains(&f64::INFINITY)
            || self.upper.contains(&f64::NEG_INFINITY)
        {
            return Err(LpError::NonFinite("variable bounds".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::NonFinite(format!("rhs of row {i}")));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(LpError::ColumnOutOfRange { row: i, col: j, n });
                }
                if !a.is_finite() {
                    return Err(LpError::NonFinite(format!("row {i}")));
                }
            }
        }
        Ok(())
    }

    /// Worst violation of rows and bounds at `x`, in absolute terms.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.rows {
            let r = row.activity(x) - row.rhs;
            let v = match row.kind {
                RowKind::Eq => r.abs(),
                RowKind::Ge => (-r).max(0.0),
                RowKind::Le => r.max(0.0),
            };
            worst = worst.max(v);
        }
        for j in 0..self.num_vars() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Relative residuals at the returned point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// One interior-point iterate, recorded when [`SolverOptions::trace`] is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateRecord {
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `xᵀz + wᵀv`, always nonnegative.
    pub complementarity: f64,
    /// `r_cᵀx − yᵀr_b + vᵀr_u`: the part of the objective gap caused by infeasibility.
    pub infeasibility_term: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub residuals: Residuals,
    pub trace: Vec<IterateRecord>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn empty(status: LpStatus, lp: &LinearProgram) -> Self {
        Self {
            status,
            x: vec![f64::NAN; lp.num_vars()],
            duals: vec![f64::NAN; lp.num_rows()],
            reduced_costs: vec![f64::NAN; lp.num_vars()],
            objective: f64::NAN,
            dual_objective: f64::NAN,
            iterations: 0,
            residuals: Residuals::default(),
            trace: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub step_fraction: f64,
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200, step_fraction: 0.9995, trace: false }
    }
}

/// Solves `lp` with the predictor-corrector interior-point method.
pub fn solve(lp: &LinearProgram, tol: f64) -> Result<LpSolution, LpError> {
    solve_with(lp, &SolverOptions { tol, ..SolverOptions::default() })
}

pub fn solve_with(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    if !(opts.tol > 0.0) {
        return Err(LpError::Tolerance(opts.tol));
    }
    lp.check()?;
    ipm::solve_program(lp, opts)
}

#[cfg(test)]
mod tests;
