//! Exhaustive vertex enumeration, used as an independent oracle for tiny programs.

use nalgebra::{DMatrix, DVector};

use super::{LinearProgram, LpError, RowKind};

pub const BRUTE_FORCE_MAX_VARS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub enum BruteForceOutcome {
    Optimal { objective: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl BruteForceOutcome {
    pub fn objective(&self) -> Option<f64> {
        match self {
            Self::Optimal { objective, .. } => Some(*objective),
            _ => None,
        }
    }
}

struct Plane {
    normal: Vec<f64>,
    rhs: f64,
    kind: RowKind,
}

fn planes(lp: &LinearProgram) -> Vec<Plane> {
    let n = lp.num_vars();
    let mut out = Vec::new();
    for row in &lp.rows {
        let mut normal = vec![0.0; n];
        for &(j, a) in &row.coeffs {
            normal[j] += a;
        }
        out.push(Plane { normal, rhs: row.rhs, kind: row.kind });
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        if lp.lower[j].is_finite() {
            out.push(Plane { normal: e.clone(), rhs: lp.lower[j], kind: RowKind::Ge });
        }
        if lp.upper[j].is_finite() {
            out.push(Plane { normal: e, rhs: lp.upper[j], kind: RowKind::Le });
        }
    }
    out
}

fn rank(rows: &[&Vec<f64>], n: usize) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    m.rank(1e-10 * m.amax().max(1.0))
}

fn satisfies(p: &Plane, x: &[f64]) -> bool {
    let act: f64 = p.normal.iter().zip(x).map(|(a, v)| a * v).sum();
    let tol = 1e-9 * (1.0 + p.rhs.abs() + x.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    match p.kind {
        RowKind::Eq => (act - p.rhs).abs() <= tol,
        RowKind::Ge => act >= p.rhs - tol,
        RowKind::Le => act <= p.rhs + tol,
    }
}

fn solve_square(ps: &[&Plane], n: usize) -> Option<Vec<f64>> {
    let a = DMatrix::from_fn(n, n, |i, j| ps[i].normal[j]);
    let lu = a.clone().full_piv_lu();
    let u = lu.u();
    let big = (0..n).fold(0.0_f64, |m, i| m.max(u[(i, i)].abs()));
    if (0..n).any(|i| u[(i, i)].abs() <= 1e-11 * big.max(1e-300)) {
        return None;
    }
    let b = DVector::from_iterator(n, ps.iter().map(|p| p.rhs));
    lu.solve(&b).map(|x| x.data.into())
}

/// Visits every `k`-subset of `0..n` in lexicographic order.
fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else { return };
        idx[i] += 1;
        for t in i + 1..k {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

/// Solves a program with at most [`BRUTE_FORCE_MAX_VARS`] variables by checking every
/// basic solution. The feasible region must be pointed (the row normals and finite
/// bounds together span the variable space), otherwise [`LpError::Dimension`] is
/// returned since no vertex can exist.
pub fn brute_force_lp(lp: &LinearProgram) -> Result<BruteForceOutcome, LpError> {
    lp.check()?;
    let n = lp.num_vars();
    if n > BRUTE_FORCE_MAX_VARS {
        return Err(LpError::TooLarge { got: n, max: BRUTE_FORCE_MAX_VARS });
    }
    if lp.lower.iter().zip(&lp.upper).any(|(l, u)| l > u) {
        return Ok(BruteForceOutcome::Infeasible);
    }
    let all = planes(lp);
    if n == 0 {
        let feasible = all.iter().all(|p| satisfies(p, &[]));
        return Ok(if feasible {
            BruteForceOutcome::Optimal { objective: lp.offset, x: Vec::new() }
        } else {
            BruteForceOutcome::Infeasible
        });
    }
    let normals: Vec<&Vec<f64>> = all.iter().map(|p| &p.normal).collect();
    if rank(&normals, n) < n {
        return Err(LpError::Dimension { what: "constraint normals (rank)", got: rank(&normals, n), expected: n });
    }

    // Equality rows are active at every vertex; force them in when independent.
    let eq: Vec<usize> = (0..all.len()).filter(|&i| all[i].kind == RowKind::Eq).collect();
    let eq_normals: Vec<&Vec<f64>> = eq.iter().map(|&i| &all[i].normal).collect();
    let (forced, pool): (Vec<usize>, Vec<usize>) = if !eq.is_empty() && eq.len() <= n && rank(&eq_normals, n) == eq.len() {
        (eq.clone(), (0..all.len()).filter(|i| !eq.contains(i)).collect())
    } else {
        (Vec::new(), (0..all.len()).collect())
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut chosen: Vec<&Plane> = Vec::with_capacity(n);
    for_each_subset(pool.len(), n - forced.len(), |sub| {
        chosen.clear();
        chosen.extend(forced.iter().map(|&i| &all[i]));
        chosen.extend(sub.iter().map(|&s| &all[pool[s]]));
        let Some(x) = solve_square(&chosen, n) else { return };
        if !all.iter().all(|p| satisfies(p, &x)) {
            return;
        }
        let obj = lp.objective_value(&x);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, x));
        }
    });
    let Some((objective, x)) = best else {
        return Ok(BruteForceOutcome::Infeasible);
    };

    // A recession direction with negative cost makes the program unbounded.
    if lp.lower.iter().chain(&lp.upper).any(|b| !b.is_finite()) {
        let mut rec = LinearProgram::new(n);
        rec.objective = lp.objective.clone();
        for j in 0..n {
            let lo = if lp.lower[j].is_finite() { 0.0 } else { -1.0 };
            let hi = if lp.upper[j].is_finite() { 0.0 } else { 1.0 };
            rec.set_bounds(j, lo, hi);
        }
        for row in &lp.rows {
            rec.add_row(row.coeffs.clone(), row.kind, 0.0);
        }
        if let BruteForceOutcome::Optimal { objective: slope, .. } = brute_force_lp(&rec)? {
            let scale = lp.objective.iter().fold(1.0_f64, |m, c| m.max(c.abs()));
            if slope < -1e-9 * scale {
                return Ok(BruteForceOutcome::Unbounded);
            }
        }
    }
    Ok(BruteForceOutcome::Optimal { objective, x })
}
