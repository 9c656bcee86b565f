use super::formulation::{Constraint, Formulation, FormulationKind, Sense, SCHEMA_VERSION};
use super::soc::{bus_lookup, objective, Layout};
use super::{check_loads, OpfError};
use crate::grid::PowerNetwork;

/// The AC model in polar voltage coordinates `(vm, va)`.
pub type AcOpfDescription = Formulation;

pub fn build_ac(net: &PowerNetwork, pd: &[f64], qd: &[f64]) -> Result<AcOpfDescription, OpfError> {
    let nb = net.buses.len();
    check_loads("pd", pd, nb)?;
    check_loads("qd", qd, nb)?;
    let bus = bus_lookup(net);
    let slack = bus(net.slack_bus.ok_or(OpfError::NoReference)?)?;
    let free = |n: usize| std::iter::repeat_n((f64::NEG_INFINITY, f64::INFINITY), n);
    let ne = net.branches.len();

    let mut layout = Layout::new();
    let vm = layout.push("vm", net.buses.iter().map(|b| (b.vmin, b.vmax)));
    let va = layout.push("va", free(nb));
    let pg = layout.push("pg", net.generators.iter().map(|g| (g.pmin, g.pmax)));
    let qg = layout.push("qg", net.generators.iter().map(|g| (g.qmin, g.qmax)));
    let pf = layout.push("pf", free(ne));
    let qf = layout.push("qf", free(ne));
    let pt = layout.push("pt", free(ne));
    let qt = layout.push("qt", free(ne));

    let mut pairs: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); nb];
    for (k, g) in net.generators.iter().enumerate() {
        pairs[bus(g.bus)?].push((pg + k, qg + k, 1.0));
    }
    for (e, br) in net.branches.iter().enumerate() {
        pairs[bus(br.from)?].push((pf + e, qf + e, -1.0));
        pairs[bus(br.to)?].push((pt + e, qt + e, -1.0));
    }

    let mut constraints = Vec::new();
    for (i, b) in net.buses.iter().enumerate() {
        let mut indices = vec![vm + i];
        let mut coefficients = vec![pd[i], qd[i], b.shunt.re, b.shunt.im];
        for &(p, q, sign) in &pairs[i] {
            indices.extend([p, q]);
            coefficients.push(sign);
        }
        constraints.push(Constraint { kind: "power_balance".into(), sense: Sense::Eq, indices, coefficients, rhs: 0.0 });
    }
    for (e, br) in net.branches.iter().enumerate() {
        let (i, j) = (bus(br.from)?, bus(br.to)?);
        let volts = [vm + i, vm + j, va + i, va + j];
        let y = br.admittance;
        for (kind, p, q, yc) in [("ohm_from", pf, qf, br.charging_from), ("ohm_to", pt, qt, br.charging_to)] {
            let mut indices = vec![p + e, q + e];
            indices.extend(volts);
            constraints.push(Constraint {
                kind: kind.into(),
                sense: Sense::Eq,
                indices,
                coefficients: vec![y.re, y.im, yc.re, yc.im],
                rhs: 0.0,
            });
        }
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
    constraints.push(Constraint::linear("ref_angle", Sense::Eq, &[(va + slack, 1.0)], 0.0));
    for br in &net.branches {
        let (i, j) = (bus(br.from)?, bus(br.to)?);
        let diff = [(va + i, 1.0), (va + j, -1.0)];
        if let Some(lo) = br.angle_min {
            constraints.push(Constraint::linear("angle_diff", Sense::Ge, &diff, lo));
        }
        if let Some(hi) = br.angle_max {
            constraints.push(Constraint::linear("angle_diff", Sense::Le, &diff, hi));
        }
    }

    Ok(Formulation {
        schema_version: SCHEMA_VERSION,
        formulation: FormulationKind::Ac,
        objective: objective(net, pg),
        variables: layout.blocks,
        constraints,
    })
}
