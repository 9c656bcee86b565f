use std::ops::Range;

use log::warn;

use super::{check_loads, OpfError};
use crate::grid::PowerNetwork;
use crate::lp::{LinearProgram, RowKind};

/// Orientation of the DC flow law: `p^f_ij = DC_FLOW_SIGN · b_ij · (θ_j − θ_i)` with
/// `b_ij = Im(1 / (r + jx))`. Since `b_ij < 0` for inductive lines, flow runs from
/// the higher angle to the lower one.
pub const DC_FLOW_SIGN: f64 = 1.0;

/// DC-OPF linear program with index maps back to the network.
///
/// Columns are laid out as generator outputs, then bus angles, then branch flows.
/// Rows are one balance row per bus, one Ohm row per branch, the reference-angle
/// pin, then angle-difference limits.
#[derive(Debug, Clone, PartialEq)]
pub struct DcOpfProblem {
    pub lp: LinearProgram,
    pub gen_cols: Range<usize>,
    pub angle_cols: Range<usize>,
    pub flow_cols: Range<usize>,
    pub balance_rows: Vec<usize>,
    pub ohm_rows: Vec<usize>,
    pub ref_row: usize,
    /// `(branch, row)` for every angle-difference limit present in the case.
    pub angle_rows: Vec<(usize, usize)>,
}

impl DcOpfProblem {
    /// Replaces the demand vector in place; the matrix is unchanged.
    pub fn set_loads(&mut self, pd: &[f64]) -> Result<(), OpfError> {
        check_loads("pd", pd, self.balance_rows.len())?;
        for (&row, &d) in self.balance_rows.iter().zip(pd) {
            self.lp.rows[row].rhs = d;
        }
        Ok(())
    }

    pub fn loads(&self) -> Vec<f64> {
        self.balance_rows.iter().map(|&r| self.lp.rows[r].rhs).collect()
    }
}

pub fn build_dc(net: &PowerNetwork, pd: &[f64]) -> Result<DcOpfProblem, OpfError> {
    let nb = net.buses.len();
    check_loads("pd", pd, nb)?;
    let index = net.bus_indices();
    let bus = |id: crate::grid::BusId| index.get(&id).copied().ok_or(OpfError::UnknownBus(id.0));
    let slack = bus(net.slack_bus.ok_or(OpfError::NoReference)?)?;

    let ng = net.generators.len();
    let ne = net.branches.len();
    let gen_cols = 0..ng;
    let angle_cols = ng..ng + nb;
    let flow_cols = ng + nb..ng + nb + ne;
    let mut lp = LinearProgram::new(ng + nb + ne);

    for (k, g) in net.generators.iter().enumerate() {
        if g.cost.quadratic != 0.0 {
            warn!("generator {k} at bus {}: quadratic cost term ignored in the DC objective", g.bus);
        }
        lp.objective[k] = g.cost.linear;
        lp.set_bounds(k, g.pmin, g.pmax);
    }
    for i in angle_cols.clone() {
        lp.set_free(i);
    }
    for (e, br) in net.branches.iter().enumerate() {
        let limit = br.rate.unwrap_or(f64::INFINITY);
        lp.set_bounds(flow_cols.start + e, -limit, limit);
    }

    let mut entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nb];
    for (k, g) in net.generators.iter().enumerate() {
        entries[bus(g.bus)?].push((k, 1.0));
    }
    for (e, br) in net.branches.iter().enumerate() {
        entries[bus(br.from)?].push((flow_cols.start + e, -1.0));
        entries[bus(br.to)?].push((flow_cols.start + e, 1.0));
    }
    let balance_rows = entries
        .into_iter()
        .zip(pd)
        .map(|(coeffs, &d)| lp.add_row(coeffs, RowKind::Eq, d))
        .collect();

    let mut ohm_rows = Vec::with_capacity(ne);
    let mut angle_limits = Vec::new();
    for (e, br) in net.branches.iter().enumerate() {
        let (i, j) = (bus(br.from)?, bus(br.to)?);
        let b = DC_FLOW_SIGN * br.susceptance();
        let (ti, tj) = (angle_cols.start + i, angle_cols.start + j);
        ohm_rows.push(lp.add_row(vec![(flow_cols.start + e, 1.0), (tj, -b), (ti, b)], RowKind::Eq, 0.0));
        if let Some(lo) = br.angle_min {
            angle_limits.push((e, vec![(ti, 1.0), (tj, -1.0)], RowKind::Ge, lo));
        }
        if let Some(hi) = br.angle_max {
            angle_limits.push((e, vec![(ti, 1.0), (tj, -1.0)], RowKind::Le, hi));
        }
    }
    let ref_row = lp.add_row(vec![(angle_cols.start + slack, 1.0)], RowKind::Eq, 0.0);
    let angle_rows = angle_limits
        .into_iter()
        .map(|(e, coeffs, kind, rhs)| (e, lp.add_row(coeffs, kind, rhs)))
        .collect();

    Ok(DcOpfProblem { lp, gen_cols, angle_cols, flow_cols, balance_rows, ohm_rows, ref_row, angle_rows })
}
