use std::collections::HashSet;

use serde::Serialize;

use super::{BusKind, PowerNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationCode {
    InvalidBaseMva,
    DuplicateBus,
    SlackCount,
    VoltageBounds,
    DanglingBranch,
    SelfLoop,
    NegativeThermalLimit,
    NonFiniteAdmittance,
    DanglingGenerator,
    ActiveBounds,
    ReactiveBounds,
    LoadCount,
    NonFiniteLoad,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

fn push(out: &mut Vec<Violation>, code: ViolationCode, message: String) {
    out.push(Violation { code, message });
}

/// Lists every invariant the network breaks; an empty list means the network is usable.
pub fn validate(net: &PowerNetwork) -> Vec<Violation> {
    use ViolationCode::*;
    let mut out = Vec::new();

    if !(net.base_mva.is_finite() && net.base_mva > 0.0) {
        push(&mut out, InvalidBaseMva, format!("baseMVA = {}", net.base_mva));
    }

    let mut seen = HashSet::new();
    for b in &net.buses {
        if !seen.insert(b.id) {
            push(&mut out, DuplicateBus, format!("bus {} declared twice", b.id));
        }
        if !(b.vmin > 0.0 && b.vmin <= b.vmax) {
            push(&mut out, VoltageBounds, format!("bus {}: vmin {} vmax {}", b.id, b.vmin, b.vmax));
        }
    }
    let refs = net.buses.iter().filter(|b| b.kind == BusKind::Reference).count();
    if refs != 1 || net.slack_bus.is_none_or(|s| !seen.contains(&s)) {
        push(&mut out, SlackCount, format!("{refs} reference buses, expected exactly one"));
    }

    for (k, br) in net.branches.iter().enumerate() {
        for end in [br.from, br.to] {
            if !seen.contains(&end) {
                push(&mut out, DanglingBranch, format!("branch {k} references unknown bus {end}"));
            }
        }
        if br.from == br.to {
            push(&mut out, SelfLoop, format!("branch {k} connects bus {} to itself", br.from));
        }
        if br.rate.is_some_and(|r| !(r >= 0.0)) {
            push(&mut out, NegativeThermalLimit, format!("branch {k}: rate {:?}", br.rate));
        }
        if !(br.admittance.re.is_finite() && br.admittance.im.is_finite()) {
            push(&mut out, NonFiniteAdmittance, format!("branch {k}: r = {}, x = {}", br.r, br.x));
        }
    }

    for (k, g) in net.generators.iter().enumerate() {
        if !seen.contains(&g.bus) {
            push(&mut out, DanglingGenerator, format!("generator {k} references unknown bus {}", g.bus));
        }
        if !(g.pmin <= g.pmax) {
            push(&mut out, ActiveBounds, format!("generator {k}: pmin {} > pmax {}", g.pmin, g.pmax));
        }
        if !(g.qmin <= g.qmax) {
            push(&mut out, ReactiveBounds, format!("generator {k}: qmin {} > qmax {}", g.qmin, g.qmax));
        }
    }

    if net.loads.len() != net.buses.len() {
        push(&mut out, LoadCount, format!("{} loads for {} buses", net.loads.len(), net.buses.len()));
    }
    if net.loads.iter().any(|l| !(l.p.is_finite() && l.q.is_finite())) {
        push(&mut out, NonFiniteLoad, "non-finite bus demand".to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{parse_case, BusId};

    fn case14() -> PowerNetwork {
        parse_case(include_str!("../../data/case14.m")).unwrap()
    }

    #[test]
    fn bundled_case_is_valid() {
        assert!(validate(&case14()).is_empty());
    }

    #[test]
    fn dangling_branch() {
        let mut net = case14();
        net.branches[3].to = BusId(99);
        let v = validate(&net);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code, ViolationCode::DanglingBranch);
    }

    #[test]
    fn generator_bound_order() {
        let mut net = case14();
        net.generators[1].pmin = net.generators[1].pmax + 0.5;
        let v = validate(&net);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code, ViolationCode::ActiveBounds);
    }

    #[test]
    fn slack_must_be_unique() {
        let mut net = case14();
        net.buses[4].kind = BusKind::Reference;
        let codes: Vec<_> = validate(&net).into_iter().map(|v| v.code).collect();
        assert_eq!(codes, vec![ViolationCode::SlackCount]);
    }

    #[test]
    fn self_loop_and_voltage() {
        let mut net = case14();
        net.branches[0].to = net.branches[0].from;
        net.buses[2].vmin = 0.0;
        let codes: Vec<_> = validate(&net).into_iter().map(|v| v.code).collect();
        assert!(codes.contains(&ViolationCode::SelfLoop));
        assert!(codes.contains(&ViolationCode::VoltageBounds));
    }
}
