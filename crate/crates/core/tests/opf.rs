use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use icnn_opf::grid::{parse_case, Branch, BusId, GenCost, Generator, PowerNetwork};
use icnn_opf::lp::{brute_force_lp, solve, value_and_gradient};
use icnn_opf::opf::{
    build_ac, build_dc, build_soc, export_formulation, import_formulation, soc_branch_coefficients, Formulation,
    FormulationKind,
};

fn case14() -> PowerNetwork {
    parse_case(include_str!("../data/case14.m")).unwrap()
}

fn toy() -> PowerNetwork {
    let mut net = parse_case(include_str!("../data/toy2.m")).unwrap();
    net.generators[0].cost.linear = 10.0;
    net.generators[0].pmax = 2.0;
    net
}

fn branch(y: Complex64, yc_from: Complex64, yc_to: Complex64) -> Branch {
    let z = if y.norm() > 0.0 { y.inv() } else { Complex64::new(0.0, 0.0) };
    Branch {
        from: BusId(1),
        to: BusId(2),
        r: z.re,
        x: z.im,
        admittance: y,
        charging_from: yc_from,
        charging_to: yc_to,
        rate: None,
        angle_min: None,
        angle_max: None,
        tap: 1.0,
        shift: 0.0,
    }
}

/// Complex power entering the branch at each end, from the polar voltages.
fn polar_flows(br: &Branch, vi: f64, ti: f64, vj: f64, tj: f64) -> (Complex64, Complex64) {
    let (ui, uj) = (Complex64::from_polar(vi, ti), Complex64::from_polar(vj, tj));
    let y = br.admittance;
    let sij = (y + br.charging_from).conj() * vi * vi - y.conj() * ui * uj.conj();
    let sji = (y + br.charging_to).conj() * vj * vj - y.conj() * uj * ui.conj();
    (sij, sji)
}

#[test]
fn gamma_for_a_pure_conductance() {
    let g = soc_branch_coefficients(&branch(Complex64::new(1.0, 0.0), Complex64::default(), Complex64::default()));
    assert_eq!((g.forward.p, g.forward.pr, g.forward.pi), (1.0, -1.0, 0.0));
    let zero = soc_branch_coefficients(&branch(Complex64::default(), Complex64::default(), Complex64::default()));
    assert!(zero.forward.as_array().iter().chain(zero.reverse.as_array().iter()).all(|&c| c == 0.0));
}

#[test]
fn lossless_branch_has_no_active_self_terms() {
    let g = soc_branch_coefficients(&branch(Complex64::new(0.0, -7.3), Complex64::default(), Complex64::default()));
    for dir in [g.forward, g.reverse] {
        assert_eq!(dir.p, 0.0);
        assert_eq!(dir.pr, 0.0);
    }
}

#[test]
fn gamma_matches_polar_flows_on_random_branches() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mut c = || Complex64::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
        let br = branch(c(), c() * 0.05, c() * 0.05);
        let gm = soc_branch_coefficients(&br);
        let (vi, vj) = (rng.random_range(0.9..1.1), rng.random_range(0.9..1.1));
        let (ti, tj) = (rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6));
        let (sij, sji) = polar_flows(&br, vi, ti, vj, tj);
        let (wr, wi) = (vi * vj * (tj - ti).cos(), vi * vj * (tj - ti).sin());
        let (pf, qf) = gm.forward.flow(vi * vi, wr, wi);
        let (pt, qt) = gm.reverse.flow(vj * vj, wr, wi);
        for (a, b) in [(pf, sij.re), (qf, sij.im), (pt, sji.re), (qt, sji.im)] {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    assert!(worst <= 1e-10, "worst relative mismatch {worst}");
}

#[test]
fn case14_soc_structure() {
    let net = case14();
    let soc = build_soc(&net, &net.reference_pd(), &net.reference_qd()).unwrap();
    let f = &soc.formulation;
    assert_eq!(f.formulation, FormulationKind::Soc);
    assert_eq!(f.count_kind("jabr"), 20);
    assert_eq!(f.count_kind("thermal"), 40);
    assert_eq!(f.block("w").unwrap().len(), 14);
    assert_eq!(f.block("wr").unwrap().len(), 20);
    assert_eq!(f.block("wi").unwrap().len(), 20);
    assert_eq!(soc.gamma.len(), 20);
    for (k, name) in ["ohm_p_fr", "ohm_q_fr", "ohm_p_to", "ohm_q_to"].into_iter().enumerate() {
        assert_eq!(f.count_kind(name), 20, "{k} {name}");
    }
    assert!(build_soc(&net, &[0.0; 3], &net.reference_qd()).is_err());
}

#[test]
fn soc_point_from_an_ac_state_is_feasible_in_the_ohm_rows() {
    // lift a flat-ish operating point and check every linear Ohm row
    let net = case14();
    let soc = build_soc(&net, &net.reference_pd(), &net.reference_qd()).unwrap();
    let f = &soc.formulation;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let v: Vec<f64> = (0..14).map(|_| rng.random_range(0.95..1.05)).collect();
    let th: Vec<f64> = (0..14).map(|_| rng.random_range(-0.2..0.2)).collect();
    let idx = net.bus_indices();
    let mut x = vec![0.0; f.num_vars()];
    let at = |name: &str, k: usize| f.block(name).unwrap().index(k);
    for i in 0..14 {
        x[at("w", i)] = v[i] * v[i];
    }
    for (e, br) in net.branches.iter().enumerate() {
        let (i, j) = (idx[&br.from], idx[&br.to]);
        x[at("wr", e)] = v[i] * v[j] * (th[j] - th[i]).cos();
        x[at("wi", e)] = v[i] * v[j] * (th[j] - th[i]).sin();
        let (sij, sji) = polar_flows(br, v[i], th[i], v[j], th[j]);
        x[at("pf", e)] = sij.re;
        x[at("qf", e)] = sij.im;
        x[at("pt", e)] = sji.re;
        x[at("qt", e)] = sji.im;
    }
    let worst = f
        .constraints
        .iter()
        .filter(|c| c.kind.starts_with("ohm"))
        .map(|c| Formulation::violation(c, &x))
        .fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst}");
    // the lifted point sits exactly on every Jabr cone
    for c in f.constraints.iter().filter(|c| c.kind == "jabr") {
        assert!(Formulation::violation(c, &x) < 1e-12);
    }
}

#[test]
fn unit_voltage_bounds_fix_w() {
    let mut net = case14();
    for b in &mut net.buses {
        b.vmin = 1.0;
        b.vmax = 1.0;
    }
    let soc = build_soc(&net, &net.reference_pd(), &net.reference_qd()).unwrap();
    let w = soc.formulation.block("w").unwrap();
    assert!(w.lower.iter().chain(&w.upper).all(|&b| b == Some(1.0)));
}

#[test]
fn ac_toy_structure_and_round_trip() {
    let net = toy();
    let ac = build_ac(&net, &net.reference_pd(), &net.reference_qd()).unwrap();
    assert_eq!(ac.count_kind("power_balance"), 2);
    assert_eq!(ac.count_kind("ohm_from") + ac.count_kind("ohm_to"), 2);
    assert_eq!(ac.count_kind("thermal"), 2);
    assert_eq!(ac.count_kind("ref_angle"), 1);
    let text = export_formulation(&ac);
    assert_eq!(import_formulation(&text).unwrap(), ac);
    assert_eq!(export_formulation(&import_formulation(&text).unwrap()), text);
    assert!(build_ac(&net, &[1.0], &[0.0, 0.0]).is_err());
}

#[test]
fn flat_profile_is_feasible_without_demand() {
    let mut net = case14();
    for b in &mut net.buses {
        b.shunt = Complex64::default();
    }
    for br in &mut net.branches {
        br.charging_from = Complex64::default();
        br.charging_to = Complex64::default();
    }
    for g in &mut net.generators {
        g.pmin = 0.0;
        g.qmin = g.qmin.min(0.0);
        g.qmax = g.qmax.max(0.0);
    }
    let zeros = vec![0.0; 14];
    let ac = build_ac(&net, &zeros, &zeros).unwrap();
    let mut x = vec![0.0; ac.num_vars()];
    let vm = ac.block("vm").unwrap();
    for k in 0..vm.len() {
        x[vm.index(k)] = 1.0;
    }
    assert!(ac.max_violation(&x) <= 1e-12, "{}", ac.max_violation(&x));
    assert_eq!(ac.objective_value(&x), 0.0);
}

#[test]
fn exports_are_deterministic() {
    let net = case14();
    let (pd, qd) = (net.reference_pd(), net.reference_qd());
    let a = export_formulation(&build_soc(&net, &pd, &qd).unwrap().formulation);
    let b = export_formulation(&build_soc(&net, &pd, &qd).unwrap().formulation);
    assert_eq!(a, b);
    let keys = ["\"schema_version\"", "\"formulation\"", "\"variables\"", "\"constraints\"", "\"objective\""];
    let pos: Vec<usize> = keys.iter().map(|k| a.find(k).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{pos:?}");
    let soc = import_formulation(&a).unwrap();
    assert_eq!(export_formulation(&soc), a);
}

#[test]
fn dc_dimensions_and_export() {
    let net = case14();
    let dc = build_dc(&net, &net.reference_pd()).unwrap();
    assert_eq!(dc.lp.num_vars(), 5 + 14 + 20);
    assert_eq!(dc.balance_rows.len(), 14);
    assert_eq!(dc.ohm_rows.len(), 20);
    let f = Formulation::from_dc(&dc);
    assert_eq!(f.num_vars(), dc.lp.num_vars());
    assert_eq!(f.constraints.len(), dc.lp.num_rows());
    assert_eq!(f.count_kind("balance"), 14);
    assert_eq!(f.count_kind("ohm"), 20);
    let back = import_formulation(&export_formulation(&f)).unwrap();
    assert_eq!(back.to_lp().unwrap(), dc.lp);
    assert!(build_dc(&net, &[1.0; 13]).is_err());

    let toy = build_dc(&toy(), &[0.0, 1.0]).unwrap();
    assert_eq!((toy.gen_cols.len(), toy.angle_cols.len(), toy.flow_cols.len()), (1, 2, 1));
    assert_eq!((toy.balance_rows.len(), toy.ohm_rows.len()), (2, 1));
}

#[test]
fn dc_supply_equals_demand() {
    let net = case14();
    let dc = build_dc(&net, &net.reference_pd()).unwrap();
    // every flow column enters one balance row with +1 and another with −1
    let mut column_sum = vec![0.0; dc.lp.num_vars()];
    for &r in &dc.balance_rows {
        for &(j, a) in &dc.lp.rows[r].coeffs {
            column_sum[j] += a;
        }
    }
    for j in dc.gen_cols.clone() {
        assert_eq!(column_sum[j], 1.0);
    }
    for j in dc.angle_cols.clone().chain(dc.flow_cols.clone()) {
        assert_eq!(column_sum[j], 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let pd: Vec<f64> = net.reference_pd().iter().map(|p| p * rng.random_range(0.8..1.2)).collect();
        let v = value_and_gradient(&net, &pd).unwrap();
        assert!(v.is_optimal());
        let supply: f64 = v.solution.x[dc.gen_cols.clone()].iter().sum();
        assert!((supply - pd.iter().sum::<f64>()).abs() < 1e-7);
    }
}

#[test]
fn zero_demand_dc_optimum() {
    let net = case14();
    let dc = build_dc(&net, &[0.0; 14]).unwrap();
    let s = solve(&dc.lp, 1e-8).unwrap();
    assert!(s.is_optimal());
    assert!(s.objective.abs() < 1e-6);
    assert!(s.x[dc.gen_cols.clone()].iter().all(|p| p.abs() < 1e-7));
}

#[test]
fn dc_optimum_lower_bounds_discrete_dispatch() {
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
    for load in [0.3, 0.8, 1.0, 1.7] {
        let pd = [0.0, load];
        let z = value_and_gradient(&net, &pd).unwrap().z;
        let steps = 40;
        let mut best = f64::INFINITY;
        for k1 in 0..=steps {
            for k2 in 0..=steps {
                let (p1, p2) = (2.0 * k1 as f64 / steps as f64, 2.0 * k2 as f64 / steps as f64);
                if (p1 + p2 - load).abs() > 1e-12 {
                    continue;
                }
                // the line carries exactly the output at the generator-only bus
                if p1 <= 0.5 + 1e-12 {
                    best = best.min(10.0 * p1 + 50.0 * p2);
                }
            }
        }
        assert!(best.is_finite());
        // interior-point optimum is accurate to the default relative tolerance
        assert!(z <= best + 1e-8 * (1.0 + best.abs()), "load {load}: {z} > {best}");
        let brute = brute_force_lp(&build_dc(&net, &pd).unwrap().lp).unwrap().objective().unwrap();
        assert!((z - brute).abs() < 1e-6);
    }
}
