use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::grid::{parse_case, GenCost, Generator, PowerNetwork};

fn toy() -> PowerNetwork {
    let mut net = parse_case(include_str!("../../data/toy2.m")).unwrap();
    net.generators[0].cost.linear = 10.0;
    net.generators[0].pmax = 2.0;
    net
}

fn congested_toy() -> PowerNetwork {
    let mut net = toy();
    net.branches[0].rate = Some(0.5);
    net.generators.push(Generator {
        bus: net.buses[1].id,
        pmin: 0.0,
        pmax: 2.0,
        qmin: 0.0,
        qmax: 0.0,
        cost: GenCost { linear: 50.0, quadratic: 0.0, constant: 0.0 },
    });
    net
}

#[test]
fn one_dimensional() {
    let mut lp = LinearProgram::new(1);
    lp.objective[0] = 1.0;
    lp.set_free(0);
    lp.add_row(vec![(0, 1.0)], RowKind::Ge, 3.0);
    let s = solve(&lp, 1e-8).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    assert!((s.objective - 3.0).abs() < 1e-7);
    assert!((s.duals[0] - 1.0).abs() < 1e-7);
    assert_eq!(brute_force_lp(&lp).unwrap().objective(), Some(3.0));
}

#[test]
fn uncongested_toy_prices() {
    let v = value_and_gradient(&toy(), &[0.0, 1.0]).unwrap();
    assert!(v.is_optimal());
    assert!((v.z - 10.0).abs() < 1e-6);
    for y in &v.y {
        assert!((y - 10.0).abs() < 1e-6, "{:?}", v.y);
    }
}

#[test]
fn congested_toy_prices() {
    let net = congested_toy();
    let v = value_and_gradient(&net, &[0.0, 1.0]).unwrap();
    assert!((v.z - 30.0).abs() < 1e-6);
    assert!((v.y[0] - 10.0).abs() < 1e-5);
    assert!((v.y[1] - 50.0).abs() < 1e-5);
    let dc = crate::opf::build_dc(&net, &[0.0, 1.0]).unwrap();
    let brute = brute_force_lp(&dc.lp).unwrap().objective().unwrap();
    assert!((brute - 30.0).abs() < 1e-9);
}

#[test]
fn zero_demand_costs_nothing() {
    let v = value_and_gradient(&toy(), &[0.0, 0.0]).unwrap();
    assert!(v.is_optimal());
    assert!(v.z.abs() < 1e-7);
    assert!(v.solution.x[0].abs() < 1e-7);
}

#[test]
fn infeasible_rows() {
    let mut lp = LinearProgram::new(1);
    lp.set_free(0);
    lp.add_row(vec![(0, 1.0)], RowKind::Ge, 1.0);
    lp.add_row(vec![(0, 1.0)], RowKind::Le, 0.0);
    assert_eq!(solve(&lp, 1e-8).unwrap().status, LpStatus::Infeasible);
    assert_eq!(brute_force_lp(&lp).unwrap(), BruteForceOutcome::Infeasible);
}

#[test]
fn demand_beyond_capacity_is_infeasible() {
    let v = value_and_gradient(&toy(), &[0.0, 2.5]).unwrap();
    assert_eq!(v.status, LpStatus::Infeasible);
    assert!(v.y.is_empty());
}

#[test]
fn unbounded_detected() {
    let mut lp = LinearProgram::new(2);
    lp.objective = vec![-1.0, 0.0];
    lp.add_row(vec![(0, 1.0), (1, -1.0)], RowKind::Le, 1.0);
    assert_eq!(solve(&lp, 1e-8).unwrap().status, LpStatus::Unbounded);
    assert_eq!(brute_force_lp(&lp).unwrap(), BruteForceOutcome::Unbounded);
}

#[test]
fn presolve_cases() {
    // Fixed variable, a column absent from every row, an emptied row and a repeated entry.
    let mut lp = LinearProgram::new(4);
    lp.objective = vec![2.0, 1.0, 3.0, 1.0];
    lp.set_bounds(0, 1.5, 1.5);
    lp.set_bounds(2, -1.0, 4.0);
    lp.add_row(vec![(0, 1.0), (1, 1.0), (1, 1.0)], RowKind::Ge, 3.5);
    lp.add_row(vec![(0, 2.0)], RowKind::Le, 3.0);
    lp.add_row(vec![(3, 1.0)], RowKind::Ge, -2.0);
    let s = solve(&lp, 1e-9).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    // x0 = 1.5, x1 = 1, x2 = −1, x3 = 0
    assert!((s.objective - (3.0 + 1.0 - 3.0)).abs() < 1e-7, "{}", s.objective);
    assert!((s.duals[0] - 0.5).abs() < 1e-7);
    assert_eq!(s.duals[1], 0.0);
    assert!((s.x[2] + 1.0).abs() < 1e-12);

    lp.add_row(vec![(0, 1.0)], RowKind::Ge, 2.0);
    assert_eq!(solve(&lp, 1e-9).unwrap().status, LpStatus::Infeasible);
}

#[test]
fn upper_only_and_free_columns() {
    // max x + y with x ≤ 2 (no lower bound), y free, x + y ≤ 5, y ≤ 4 + x.
    let mut lp = LinearProgram::new(2);
    lp.objective = vec![-1.0, -1.0];
    lp.set_bounds(0, f64::NEG_INFINITY, 2.0);
    lp.set_free(1);
    lp.add_row(vec![(0, 1.0), (1, 1.0)], RowKind::Le, 5.0);
    lp.add_row(vec![(1, 1.0), (0, -1.0)], RowKind::Le, 4.0);
    let s = solve(&lp, 1e-9).unwrap();
    let b = brute_force_lp(&lp).unwrap().objective().unwrap();
    assert!((s.objective - b).abs() < 1e-7);
    assert!((s.objective + 5.0).abs() < 1e-7);
    assert!(s.duals[0] <= 1e-9);
}

#[test]
fn brute_force_rejects_large_programs() {
    let lp = LinearProgram::new(BRUTE_FORCE_MAX_VARS + 1);
    assert!(matches!(brute_force_lp(&lp), Err(LpError::TooLarge { .. })));
}

#[test]
fn invalid_programs_are_errors() {
    let mut lp = LinearProgram::new(1);
    lp.add_row(vec![(3, 1.0)], RowKind::Eq, 0.0);
    assert!(matches!(solve(&lp, 1e-8), Err(LpError::ColumnOutOfRange { .. })));
    let mut lp = LinearProgram::new(1);
    lp.objective[0] = f64::NAN;
    assert!(matches!(solve(&lp, 1e-8), Err(LpError::NonFinite(_))));
    assert_eq!(solve(&LinearProgram::new(1), 0.0), Err(LpError::Tolerance(0.0)));
}

fn random_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.random_range(2..=6);
    let m = rng.random_range(1..=5);
    let mut lp = LinearProgram::new(n);
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
    for j in 0..n {
        lp.objective[j] = rng.random_range(-2.0..3.0);
        let hi = if rng.random_bool(0.6) { x0[j] + rng.random_range(0.5..2.0) } else { f64::INFINITY };
        lp.set_bounds(j, 0.0, hi);
    }
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.7) {
                coeffs.push((j, rng.random_range(-2.0..2.0)));
            }
        }
        if coeffs.is_empty() {
            continue;
        }
        let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        let (kind, rhs) = match rng.random_range(0..3) {
            0 => (RowKind::Eq, act),
            1 => (RowKind::Ge, act - rng.random_range(0.0..1.0)),
            _ => (RowKind::Le, act + rng.random_range(0.0..1.0)),
        };
        lp.add_row(coeffs, kind, rhs);
    }
    lp
}

#[test]
fn random_programs_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut optimal = 0;
    for case in 0..200 {
        let lp = random_lp(&mut rng);
        let s = solve(&lp, 1e-9).unwrap();
        match brute_force_lp(&lp).unwrap() {
            BruteForceOutcome::Optimal { objective, .. } => {
                optimal += 1;
                assert_eq!(s.status, LpStatus::Optimal, "case {case}");
                assert!((s.objective - objective).abs() <= 1e-6 * (1.0 + objective.abs()), "case {case}");
                assert!(lp.max_violation(&s.x) < 1e-7);
                assert!((s.objective - s.dual_objective).abs() <= 1e-8 * (1.0 + s.objective.abs()));
            }
            BruteForceOutcome::Unbounded => assert_eq!(s.status, LpStatus::Unbounded, "case {case} {lp:?} {s:?}"),
            BruteForceOutcome::Infeasible => assert_eq!(s.status, LpStatus::Infeasible, "case {case}"),
        }
    }
    assert!(optimal > 100);
}

#[test]
fn dual_signs_follow_row_kind() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let lp = random_lp(&mut rng);
        let s = solve(&lp, 1e-9).unwrap();
        if !s.is_optimal() {
            continue;
        }
        for (row, y) in lp.rows.iter().zip(&s.duals) {
            match row.kind {
                RowKind::Ge => assert!(*y >= -1e-7),
                RowKind::Le => assert!(*y <= 1e-7),
                RowKind::Eq => {}
            }
        }
    }
}

#[test]
fn trace_satisfies_gap_identity() {
    let net = parse_case(include_str!("../../data/case14.m")).unwrap();
    let dc = crate::opf::build_dc(&net, &net.reference_pd()).unwrap();
    let s = solve_with(&dc.lp, &SolverOptions { trace: true, ..SolverOptions::default() }).unwrap();
    assert!(s.is_optimal());
    assert!(!s.trace.is_empty());
    for r in &s.trace {
        assert!(r.complementarity >= 0.0);
        let lhs = r.primal_objective - r.dual_objective;
        let rhs = r.complementarity + r.infeasibility_term;
        assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + r.primal_objective.abs() + r.dual_objective.abs()));
    }
}
