use super::{solve_with, LpSolution, LpStatus, SolverOptions};
use crate::grid::PowerNetwork;
use crate::opf::{build_dc, OpfError};

/// DC-OPF value `z*` and its gradient with respect to the bus demands.
#[derive(Debug, Clone, PartialEq)]
pub struct DcValue {
    pub status: LpStatus,
    /// Optimal cost; NaN unless `status` is optimal.
    pub z: f64,
    /// Balance-row duals ordered by bus; empty unless `status` is optimal.
    pub y: Vec<f64>,
    pub solution: LpSolution,
}

impl DcValue {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves the DC-OPF at demand `pd` with default solver settings.
pub fn value_and_gradient(net: &PowerNetwork, pd: &[f64]) -> Result<DcValue, OpfError> {
    value_and_gradient_with(net, pd, &SolverOptions::default())
}

pub fn value_and_gradient_with(net: &PowerNetwork, pd: &[f64], opts: &SolverOptions) -> Result<DcValue, OpfError> {
    let dc = build_dc(net, pd)?;
    let solution = solve_with(&dc.lp, opts)?;
    let (z, y) = if solution.is_optimal() {
        (solution.objective, dc.balance_rows.iter().map(|&r| solution.duals[r]).collect())
    } else {
        (f64::NAN, Vec::new())
    };
    Ok(DcValue { status: solution.status, z, y, solution })
}
