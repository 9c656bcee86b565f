use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

#[test]
fn gap_examples() {
    assert_eq!(gap(100.0, 100.0).unwrap(), (0.0, 0.0));
    let (s, a) = gap(100.15, 100.0).unwrap();
    assert!((s - 0.0015).abs() < 1e-15 && (a - 0.0015).abs() < 1e-15);
    let (s, a) = gap(98.0, 100.0).unwrap();
    assert!((s + 0.02).abs() < 1e-15 && (a - 0.02).abs() < 1e-15);
    // negative optimum: over-estimates are still positive
    assert!(gap(-90.0, -100.0).unwrap().0 > 0.0);
    assert_eq!(gap(1.0, 0.0), Err(EvalError::UndefinedGap(0)));
}

#[test]
fn geometric_mean() {
    assert!((geo_mean(&[1.0, 4.0]) - 2.0).abs() < 1e-15);
    for x in [1e-9, 0.37, 12.0] {
        assert!((geo_mean(&[x, x, x]) - x).abs() <= 1e-15 * x.max(1.0));
    }
    assert!((geo_mean(&[0.0, 1e-12]) - 1e-12).abs() < 1e-14 * 1e-12);
    assert!(geo_mean(&[]).is_nan());
    // the plain product would underflow
    assert!((geo_mean(&vec![1e-3; 1000]) - 1e-3).abs() < 1e-15);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..200 {
        let g: Vec<f64> = (0..rng.random_range(1..20)).map(|_| rng.random_range(0.0..0.1)).collect();
        let m = geo_mean(&g);
        let hi = g.iter().copied().fold(0.0, f64::max);
        let lo = g.iter().map(|v| v.max(GAP_FLOOR)).fold(f64::INFINITY, f64::min);
        assert!(m <= hi * (1.0 + 1e-12) && m >= lo * (1.0 - 1e-12));
    }
}

#[test]
fn gaps_are_scale_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let z: f64 = rng.random_range(1.0..1e4);
        let p = z * rng.random_range(0.9..1.1);
        let (s1, a1) = gap(p, z).unwrap();
        let (s2, a2) = gap(7.3 * p, 7.3 * z).unwrap();
        assert!((s1 - s2).abs() <= 1e-15 && (a1 - a2).abs() <= 1e-15);
    }
}

#[test]
fn perfect_and_constant_predictions() {
    let perfect = records_from([(0, 100.0, 100.0, 1.0), (1, 200.0, 200.0, 2.0)]).unwrap();
    let s = summarize("ICNN", "toy", FormulationKind::Dc, &perfect);
    assert!((s.mean_gap - GAP_FLOOR).abs() < 1e-14 * GAP_FLOOR);
    assert_eq!(s.worst_gap, 0.0);
    assert_eq!(s.floored, 2);

    // mean prediction 150 against optima 100 and 200
    let constant = records_from([(0, 100.0, 150.0, 1.0), (1, 200.0, 150.0, 2.0)]).unwrap();
    let s = summarize("DNN", "toy", FormulationKind::Dc, &constant);
    assert_eq!(s.worst_gap, 0.5);
    assert!((s.mean_gap - (0.5f64 * 0.25).sqrt()).abs() < 1e-15);
    assert!(s.worst_gap >= s.mean_gap);
    assert_eq!(records_from([(4, 0.0, 1.0, 0.0)]), Err(EvalError::UndefinedGap(4)));
}

#[test]
fn histogram_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let v: Vec<f64> = (0..1234).map(|_| rng.random_range(-0.01..0.02)).collect();
    let h = histogram(&v, 17);
    assert_eq!(h.counts.iter().sum::<usize>(), 1234);
    assert_eq!(h.edges.len(), 18);
    assert_eq!(histogram(&[3.0, 3.0], 4).counts.iter().sum::<usize>(), 2);
}

fn fake(n: usize, seed: u64, label: &str) -> (EvalSummary, Vec<GapRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<_> = (0..n)
        .map(|i| {
            let z: f64 = rng.random_range(4000.0..6000.0);
            (i, z, z * (1.0 + rng.random_range(-0.01..0.01)), z / 2000.0)
        })
        .collect();
    let r = records_from(rows).unwrap();
    (summarize(label, "case14", FormulationKind::Dc, &r), r)
}

#[test]
fn report_shapes() {
    let (a, ra) = fake(1000, 3, "ICNN");
    let (b, rb) = fake(1000, 4, "DNN");
    let one = render_report(std::slice::from_ref(&a), std::slice::from_ref(&ra));
    let md = one.get("report.md").unwrap();
    assert!(md.contains("| System | OPF | ICNN mean gap (%) | ICNN worst gap (%) |"));
    assert!(!md.contains("DNN"));
    assert_eq!(one.get("scatter.svg").unwrap().matches("<circle").count(), 1000);
    let csv = one.get("gaps.csv").unwrap();
    assert!(csv.starts_with("id,z_true,z_pred,gap_signed,gap_abs,total_load\n"));
    assert_eq!(csv.lines().count(), 1001);

    let two = render_report(&[a.clone(), b.clone()], &[ra.clone(), rb.clone()]);
    let md = two.get("report.md").unwrap();
    assert!(md.contains("ICNN mean gap (%) | ICNN worst gap (%) | DNN mean gap (%) | DNN worst gap (%) |"));
    let row = md.lines().find(|l| l.starts_with("| case14 | DC |")).unwrap();
    assert!(row.contains(&format!(" {:.2} |", 100.0 * a.mean_gap)));
    assert!(two.get("gaps_baseline.csv").is_some());
    assert_eq!(two, render_report(&[a, b], &[ra, rb]));
}
