use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::formulation::{Constraint, Formulation, FormulationKind, Objective, Sense, VariableBlock, SCHEMA_VERSION};
use super::{check_loads, OpfError};
use crate::grid::{Branch, BusId, PowerNetwork};

/// Coefficients of one flow direction in `w`-space:
/// `p = γp·w + γpr·wr + γpi·wi` and `q = γq·w + γqr·wr + γqi·wi`, where `w` is the
/// squared voltage at the sending end.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Gamma {
    pub p: f64,
    pub pr: f64,
    pub pi: f64,
    pub q: f64,
    pub qr: f64,
    pub qi: f64,
}

impl Gamma {
    pub fn as_array(&self) -> [f64; 6] {
        [self.p, self.pr, self.pi, self.q, self.qr, self.qi]
    }

    /// Evaluates `(p, q)` at the lifted point.
    pub fn flow(&self, w: f64, wr: f64, wi: f64) -> (f64, f64) {
        (self.p * w + self.pr * wr + self.pi * wi, self.q * w + self.qr * wr + self.qi * wi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BranchGamma {
    /// From end; multiplies `w_i`.
    pub forward: Gamma,
    /// To end; multiplies `w_j`.
    pub reverse: Gamma,
}

/// Expands the AC branch flows in `w_i = v_i²`, `wr = v_i v_j cos(θ_j − θ_i)` and
/// `wi = v_i v_j sin(θ_j − θ_i)`, using `V_i V_j* = wr − j·wi`.
pub fn soc_branch_coefficients(branch: &Branch) -> BranchGamma {
    let (g, b) = (branch.admittance.re, branch.admittance.im);
    let (gf, bf) = (branch.charging_from.re, branch.charging_from.im);
    let (gt, bt) = (branch.charging_to.re, branch.charging_to.im);
    BranchGamma {
        forward: Gamma { p: g + gf, pr: -g, pi: b, q: -(b + bf), qr: b, qi: g },
        reverse: Gamma { p: g + gt, pr: -g, pi: -b, q: -(b + bt), qr: b, qi: -g },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocOpfDescription {
    pub formulation: Formulation,
    /// Per-branch coefficients, aligned with the network's branch list.
    pub gamma: Vec<BranchGamma>,
}

fn bounded(name: &str, start: usize, bounds: impl Iterator<Item = (f64, f64)>) -> VariableBlock {
    let (lower, upper): (Vec<_>, Vec<_>) =
        bounds.map(|(l, u)| (l.is_finite().then_some(l), u.is_finite().then_some(u))).unzip();
    VariableBlock { name: name.to_string(), start, lower, upper }
}

pub(super) struct Layout {
    pub blocks: Vec<VariableBlock>,
}

impl Layout {
    pub fn new() -> Self {
        Self { blocks: Vec::new() }
    }

    pub fn push(&mut self, name: &str, bounds: impl Iterator<Item = (f64, f64)>) -> usize {
        let start = self.blocks.last().map_or(0, |b| b.start + b.len());
        self.blocks.push(bounded(name, start, bounds));
        start
    }
}

pub(super) fn bus_lookup(net: &PowerNetwork) -> impl Fn(BusId) -> Result<usize, OpfError> + '_ {
    let index = net.bus_indices();
    move |id| index.get(&id).copied().ok_or(OpfError::UnknownBus(id.0))
}

pub(super) fn objective(net: &PowerNetwork, pg: usize) -> Objective {
    Objective {
        sense: "min".into(),
        indices: (0..net.generators.len()).map(|k| pg + k).collect(),
        coefficients: net.generators.iter().map(|g| g.cost.linear).collect(),
        constant: 0.0,
    }
}

pub fn build_soc(net: &PowerNetwork, pd: &[f64], qd: &[f64]) -> Result<SocOpfDescription, OpfError> {
    let nb = net.buses.len();
    check_loads("pd", pd, nb)?;
    check_loads("qd", qd, nb)?;
    let bus = bus_lookup(net);
    let free = |n: usize| std::iter::repeat_n((f64::NEG_INFINITY, f64::INFINITY), n);
    let ne = net.branches.len();

    let mut layout = Layout::new();
    let w = layout.push("w", net.buses.iter().map(|b| (b.vmin * b.vmin, b.vmax * b.vmax)));
    let wr = layout.push("wr", free(ne));
    let wi = layout.push("wi", free(ne));
    let pg = layout.push("pg", net.generators.iter().map(|g| (g.pmin, g.pmax)));
    let qg = layout.push("qg", net.generators.iter().map(|g| (g.qmin, g.qmax)));
    let pf = layout.push("pf", free(ne));
    let qf = layout.push("qf", free(ne));
    let pt = layout.push("pt", free(ne));
    let qt = layout.push("qt", free(ne));

    let mut p_terms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nb];
    let mut q_terms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nb];
    for (k, g) in net.generators.iter().enumerate() {
        let i = bus(g.bus)?;
        p_terms[i].push((pg + k, 1.0));
        q_terms[i].push((qg + k, 1.0));
    }
    for (e, br) in net.branches.iter().enumerate() {
        let (i, j) = (bus(br.from)?, bus(br.to)?);
        p_terms[i].push((pf + e, -1.0));
        q_terms[i].push((qf + e, -1.0));
        p_terms[j].push((pt + e, -1.0));
        q_terms[j].push((qt + e, -1.0));
    }
    let mut constraints = Vec::new();
    for (i, b) in net.buses.iter().enumerate() {
        let mut t = p_terms[i].clone();
        t.push((w + i, -b.shunt.re));
        constraints.push(Constraint::linear("balance_p", Sense::Eq, &t, pd[i]));
    }
    for (i, b) in net.buses.iter().enumerate() {
        let mut t = q_terms[i].clone();
        t.push((w + i, b.shunt.im));
        constraints.push(Constraint::linear("balance_q", Sense::Eq, &t, qd[i]));
    }

    let gamma: Vec<BranchGamma> = net.branches.iter().map(soc_branch_coefficients).collect();
    for (e, (br, gm)) in net.branches.iter().zip(&gamma).enumerate() {
        let (i, j) = (bus(br.from)?, bus(br.to)?);
        let (f, r) = (gm.forward, gm.reverse);
        let lift = |flow: usize, wv: usize, a: f64, ar: f64, ai: f64| {
            [(flow, 1.0), (wv, -a), (wr + e, -ar), (wi + e, -ai)]
        };
        constraints.push(Constraint::linear("ohm_p_fr", Sense::Eq, &lift(pf + e, w + i, f.p, f.pr, f.pi), 0.0));
        constraints.push(Constraint::linear("ohm_q_fr", Sense::Eq, &lift(qf + e, w + i, f.q, f.qr, f.qi), 0.0));
        constraints.push(Constraint::linear("ohm_p_to", Sense::Eq, &lift(pt + e, w + j, r.p, r.pr, r.pi), 0.0));
        constraints.push(Constraint::linear("ohm_q_to", Sense::Eq, &lift(qt + e, w + j, r.q, r.qr, r.qi), 0.0));
    }
    for (e, br) in net.branches.iter().enumerate() {
        let limit: Vec<f64> = br.rate.into_iter().collect();
        for (p, q) in [(pf + e, qf + e), (pt + e, qt + e)] {
            constraints.push(Constraint {
                kind: "thermal".into(),
                sense: Sense::Le,
                indices: vec![p, q],
                coefficients: limit.clone(),
                rhs: 0.0,
            });
        }
    }
    for (e, br) in net.branches.iter().enumerate() {
        let (i, j) = (bus(br.from)?, bus(br.to)?);
        constraints.push(Constraint {
            kind: "jabr".into(),
            sense: Sense::Le,
            indices: vec![wr + e, wi + e, w + i, w + j],
            coefficients: Vec::new(),
            rhs: 0.0,
        });
    }
    // θ_i − θ_j ∈ [lo, hi] becomes tan(−hi)·wr ≤ wi ≤ tan(−lo)·wr, valid within ±90°.
    for (e, br) in net.branches.iter().enumerate() {
        if let Some(lo) = br.angle_min.filter(|a| a.abs() < FRAC_PI_2) {
            constraints.push(Constraint::linear("angle_diff", Sense::Le, &[(wi + e, 1.0), (wr + e, (lo).tan())], 0.0));
        }
        if let Some(hi) = br.angle_max.filter(|a| a.abs() < FRAC_PI_2) {
            constraints.push(Constraint::linear("angle_diff", Sense::Ge, &[(wi + e, 1.0), (wr + e, (hi).tan())], 0.0));
        }
    }

    let formulation = Formulation {
        schema_version: SCHEMA_VERSION,
        formulation: FormulationKind::Soc,
        objective: objective(net, pg),
        variables: layout.blocks,
        constraints,
    };
    Ok(SocOpfDescription { formulation, gamma })
}
