//! Mehrotra predictor-corrector on `min cᵀx, Ax = b, 0 ≤ x ≤ u`.
//!
//! Upper bounds carry their own slack `w = u − x` with multiplier `v`, so the
//! dual is `max bᵀy − uᵀv` subject to `Aᵀy + z − v = c`, `z, v ≥ 0`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::standard::{self, Conversion, StandardForm};
use super::{IterateRecord, LinearProgram, LpError, LpSolution, LpStatus, Residuals, SolverOptions};

const DIVERGENCE: f64 = 1e10;
const MIN_STEP: f64 = 1e-10;
/// Iterations without a new best residual before giving up.
const STAGNATION: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Exit {
    Converged,
    Stalled,
    Limit,
}

#[derive(Clone)]
struct CoreResult {
    exit: Exit,
    x: Vec<f64>,
    y: Vec<f64>,
    objective: f64,
    iterations: usize,
    residuals: Residuals,
    trace: Vec<IterateRecord>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normal_matrix(form: &StandardForm, theta: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(form.m, form.m);
    for (col, &t) in form.cols.iter().zip(theta) {
        for &(i, a) in col {
            for &(k, b) in col {
                m[(i, k)] += t * a * b;
            }
        }
    }
    m
}

/// Normal-equations matrix with its Cholesky factor. When the plain factorization
/// fails the diagonal is regularized, and solves are then polished by iterative
/// refinement against the unregularized matrix.
struct Normal {
    m: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    regularized: bool,
}

impl Normal {
    fn new(m: DMatrix<f64>) -> Option<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return None;
        }
        if let Some(chol) = Cholesky::new(m.clone()) {
            return Some(Self { m, chol, regularized: false });
        }
        let scale = (0..m.nrows()).fold(1e-300_f64, |s, i| s.max(m[(i, i)].abs()));
        let mut reg = 1e-14 * scale;
        for _ in 0..6 {
            let mut r = m.clone();
            for i in 0..r.nrows() {
                r[(i, i)] += reg;
            }
            if let Some(chol) = Cholesky::new(r) {
                return Some(Self { m, chol, regularized: true });
            }
            reg *= 100.0;
        }
        None
    }

    fn solve(&self, rhs: Vec<f64>) -> Vec<f64> {
        let b = DVector::from_vec(rhs);
        let mut x = self.chol.solve(&b);
        let rounds = if self.regularized { 3 } else { 1 };
        for _ in 0..rounds {
            let r = &b - &self.m * &x;
            x += self.chol.solve(&r);
        }
        x.data.into()
    }
}

fn max_step(v: &[f64], dv: &[f64], active: impl Fn(usize) -> bool) -> f64 {
    let mut alpha: f64 = 1.0;
    for j in 0..v.len() {
        if active(j) && dv[j] < 0.0 {
            alpha = alpha.min(-v[j] / dv[j]);
        }
    }
    alpha
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<f64>,
    dw: Vec<f64>,
    dv: Vec<f64>,
}

struct State<'a> {
    form: &'a StandardForm,
    bounded: Vec<bool>,
    x: Vec<f64>,
    w: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    v: Vec<f64>,
}

impl State<'_> {
    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        normal: &Normal,
        theta: &[f64],
        rb: &[f64],
        rc: &[f64],
        ru: &[f64],
        rxz: &[f64],
        rwv: &[f64],
    ) -> Direction {
        let n = self.x.len();
        let mut rhat = vec![0.0; n];
        for j in 0..n {
            rhat[j] = rc[j] - rxz[j] / self.x[j];
            if self.bounded[j] {
                rhat[j] += (rwv[j] - self.v[j] * ru[j]) / self.w[j];
            }
        }
        let trhat: Vec<f64> = theta.iter().zip(&rhat).map(|(t, r)| t * r).collect();
        let mut rhs = self.form.mul(&trhat);
        for (r, b) in rhs.iter_mut().zip(rb) {
            *r += b;
        }
        let dy = normal.solve(rhs);
        let atdy = self.form.mul_t(&dy);
        let mut d = Direction { dx: vec![0.0; n], dy, dz: vec![0.0; n], dw: vec![0.0; n], dv: vec![0.0; n] };
        for j in 0..n {
            d.dx[j] = theta[j] * (atdy[j] - rhat[j]);
            d.dz[j] = (rxz[j] - self.z[j] * d.dx[j]) / self.x[j];
            if self.bounded[j] {
                d.dw[j] = ru[j] - d.dx[j];
                d.dv[j] = (rwv[j] - self.v[j] * d.dw[j]) / self.w[j];
            }
        }
        d
    }

    fn steps(&self, d: &Direction) -> (f64, f64) {
        let b = &self.bounded;
        let ap = max_step(&self.x, &d.dx, |_| true).min(max_step(&self.w, &d.dw, |j| b[j]));
        let ad = max_step(&self.z, &d.dz, |_| true).min(max_step(&self.v, &d.dv, |j| b[j]));
        (ap, ad)
    }

    fn complementarity_after(&self, d: &Direction, ap: f64, ad: f64) -> f64 {
        let mut s = 0.0;
        for j in 0..self.x.len() {
            s += (self.x[j] + ap * d.dx[j]) * (self.z[j] + ad * d.dz[j]);
            if self.bounded[j] {
                s += (self.w[j] + ap * d.dw[j]) * (self.v[j] + ad * d.dv[j]);
            }
        }
        s
    }
}

/// Mehrotra's heuristic starting point, adapted to the `w`/`v` split of bounded columns.
fn starting_point<'a>(form: &'a StandardForm, bounded: &[bool], u: &[f64]) -> Option<State<'a>> {
    let n = form.n();
    let normal = Normal::new(normal_matrix(form, &vec![1.0; n]))?;
    let t = normal.solve(form.b.clone());
    let mut x = form.mul_t(&t);
    let y = normal.solve(form.mul(&form.c));
    let r: Vec<f64> = form.mul_t(&y).iter().zip(&form.c).map(|(a, c)| c - a).collect();

    let mut z = vec![0.0; n];
    let mut v = vec![0.0; n];
    for j in 0..n {
        if bounded[j] {
            z[j] = r[j].max(0.0);
            v[j] = (-r[j]).max(0.0);
        } else {
            z[j] = r[j];
        }
    }
    let shift_x = (-1.5 * x.iter().cloned().fold(f64::INFINITY, f64::min)).max(0.0);
    let min_dual = (0..n)
        .map(|j| if bounded[j] { z[j].min(v[j]) } else { z[j] })
        .fold(f64::INFINITY, f64::min);
    let shift_z = (-1.5 * min_dual).max(0.0);
    x.iter_mut().for_each(|e| *e += shift_x);
    for j in 0..n {
        z[j] += shift_z;
        if bounded[j] {
            v[j] += shift_z;
        }
    }

    let xz = dot(&x, &z);
    let sx: f64 = x.iter().sum();
    let sz: f64 = z.iter().sum::<f64>() + v.iter().sum::<f64>();
    let floor = 1e-2 * (1.0 + inf_norm(&x).max(inf_norm(&z)));
    for j in 0..n {
        x[j] = (x[j] + if sz > 0.0 { 0.5 * xz / sz } else { 0.0 }).max(floor);
        z[j] = (z[j] + if sx > 0.0 { 0.5 * xz / sx } else { 0.0 }).max(floor);
        if bounded[j] {
            v[j] = v[j].max(floor);
        }
    }

    let mut w = vec![0.0; n];
    for j in 0..n {
        if bounded[j] {
            x[j] = x[j].min(0.5 * u[j]);
            w[j] = u[j] - x[j];
        }
    }
    Some(State { form, bounded: bounded.to_vec(), x, w, y, z, v })
}

fn run(orig: &StandardForm, offset: f64, opts: &SolverOptions) -> CoreResult {
    let n = orig.n();
    let sc = inf_norm(&orig.c).max(1.0);
    let finite_u: Vec<f64> = orig.upper.iter().cloned().filter(|u| u.is_finite()).collect();
    let sb = inf_norm(&orig.b).max(inf_norm(&finite_u)).max(1.0);
    let form = StandardForm {
        m: orig.m,
        cols: orig.cols.clone(),
        b: orig.b.iter().map(|b| b / sb).collect(),
        c: orig.c.iter().map(|c| c / sc).collect(),
        upper: orig.upper.iter().map(|u| u / sb).collect(),
    };
    let bounded: Vec<bool> = form.upper.iter().map(|u| u.is_finite()).collect();
    let u: Vec<f64> = form.upper.iter().map(|&u| if u.is_finite() { u } else { 0.0 }).collect();
    let bnorm = inf_norm(&orig.b).max(inf_norm(&finite_u));
    let cnorm = inf_norm(&orig.c);
    let scale = sc * sb;

    let mut result = CoreResult {
        exit: Exit::Stalled,
        x: vec![0.0; n],
        y: vec![0.0; form.m],
        objective: f64::NAN,
        iterations: 0,
        residuals: Residuals::default(),
        trace: Vec::new(),
    };
    let Some(mut st) = starting_point(&form, &bounded, &u) else {
        return result;
    };
    let pairs = (n + bounded.iter().filter(|&&b| b).count()) as f64;

    let mut iter = 0;
    // Best iterate so far by its largest residual; returned when the method stalls.
    let mut best: Option<(f64, usize, CoreResult)> = None;
    let give_up = |mut current: CoreResult, best: Option<(f64, usize, CoreResult)>, exit: Exit| {
        if let Some((_, _, mut b)) = best {
            b.trace = std::mem::take(&mut current.trace);
            b.iterations = current.iterations;
            current = b;
        }
        current.exit = exit;
        current
    };
    loop {
        let ax = form.mul(&st.x);
        let rb: Vec<f64> = form.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let aty = form.mul_t(&st.y);
        let mut rc = vec![0.0; n];
        let mut ru = vec![0.0; n];
        for j in 0..n {
            rc[j] = form.c[j] - aty[j] - st.z[j] + st.v[j];
            if bounded[j] {
                ru[j] = u[j] - st.x[j] - st.w[j];
            }
        }
        let compl = dot(&st.x, &st.z) + dot(&st.w, &st.v);
        let mu = compl / pairs;
        let pobj = dot(&form.c, &st.x);
        let dobj = dot(&form.b, &st.y) - dot(&u, &st.v);
        let primal_obj = scale * pobj + offset;
        let dual_obj = scale * dobj + offset;

        let residuals = Residuals {
            primal: (sb * inf_norm(&rb).max(inf_norm(&ru))) / (1.0 + bnorm),
            dual: sc * inf_norm(&rc) / (1.0 + cnorm),
            gap: (primal_obj - dual_obj).abs() / (1.0 + primal_obj.abs()),
        };
        if opts.trace {
            let infeas = dot(&rc, &st.x) - dot(&st.y, &rb) + dot(&st.v, &ru);
            result.trace.push(IterateRecord {
                primal_objective: primal_obj,
                dual_objective: dual_obj,
                complementarity: scale * compl,
                infeasibility_term: scale * infeas,
                mu: scale * mu,
            });
        }
        result.iterations = iter;
        result.residuals = residuals;
        result.objective = primal_obj;
        result.x = st.x.iter().map(|x| x * sb).collect();
        result.y = st.y.iter().map(|y| y * sc).collect();

        if residuals.primal <= opts.tol && residuals.dual <= opts.tol && residuals.gap <= opts.tol {
            result.exit = Exit::Converged;
            return result;
        }
        let merit = residuals.primal.max(residuals.dual).max(residuals.gap);
        if best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, iter, result.clone()));
        }
        let big = inf_norm(&st.x).max(inf_norm(&st.y)).max(inf_norm(&st.z)).max(inf_norm(&st.v));
        if !(big < DIVERGENCE) {
            return give_up(result, best, Exit::Stalled);
        }
        if iter >= opts.max_iter {
            return give_up(result, best, Exit::Limit);
        }
        if best.as_ref().is_some_and(|b| iter >= b.1 + STAGNATION) {
            return give_up(result, best, Exit::Stalled);
        }
        iter += 1;

        let theta: Vec<f64> = (0..n)
            .map(|j| {
                let mut inv = st.z[j] / st.x[j];
                if bounded[j] {
                    inv += st.v[j] / st.w[j];
                }
                1.0 / inv
            })
            .collect();
        let Some(normal) = Normal::new(normal_matrix(&form, &theta)) else {
            return give_up(result, best, Exit::Stalled);
        };

        let rxz: Vec<f64> = (0..n).map(|j| -st.x[j] * st.z[j]).collect();
        let rwv: Vec<f64> = (0..n).map(|j| -st.w[j] * st.v[j]).collect();
        let aff = st.direction(&normal, &theta, &rb, &rc, &ru, &rxz, &rwv);
        let (ap, ad) = st.steps(&aff);
        let mu_aff = st.complementarity_after(&aff, ap, ad) / pairs;
        let sigma = (mu_aff / mu).powi(3).min(1.0);

        let rxz: Vec<f64> = (0..n).map(|j| sigma * mu - st.x[j] * st.z[j] - aff.dx[j] * aff.dz[j]).collect();
        let rwv: Vec<f64> = (0..n)
            .map(|j| if bounded[j] { sigma * mu - st.w[j] * st.v[j] - aff.dw[j] * aff.dv[j] } else { 0.0 })
            .collect();
        let d = st.direction(&normal, &theta, &rb, &rc, &ru, &rxz, &rwv);
        let (ap, ad) = st.steps(&d);
        let ap = (opts.step_fraction * ap).min(1.0);
        let ad = (opts.step_fraction * ad).min(1.0);
        if ap < MIN_STEP && ad < MIN_STEP {
            return give_up(result, best, Exit::Stalled);
        }
        for j in 0..n {
            st.x[j] += ap * d.dx[j];
            st.z[j] += ad * d.dz[j];
            if bounded[j] {
                st.w[j] += ap * d.dw[j];
                st.v[j] += ad * d.dv[j];
            }
        }
        for (y, dy) in st.y.iter_mut().zip(&d.dy) {
            *y += ad * dy;
        }
    }
}

/// The auxiliary programs only need their optimal value to a loose accuracy.
fn settled(r: &CoreResult) -> bool {
    let Residuals { primal, dual, gap } = r.residuals;
    r.exit == Exit::Converged || primal.max(dual).max(gap) <= 1e-7
}

/// `min Σ artificials` over `Ax + s⁺ − s⁻ = b`; a positive optimum proves infeasibility.
fn phase_one(form: &StandardForm, opts: &SolverOptions) -> Option<bool> {
    let mut f = form.clone();
    f.c.iter_mut().for_each(|c| *c = 0.0);
    for i in 0..form.m {
        f.push_col(vec![(i, 1.0)], 1.0, f64::INFINITY);
        f.push_col(vec![(i, -1.0)], 1.0, f64::INFINITY);
    }
    let r = run(&f, 0.0, &SolverOptions { tol: opts.tol.min(1e-9), ..*opts });
    settled(&r).then(|| r.objective > 1e-6 * (1.0 + inf_norm(&form.b)))
}

/// Elastic dual feasibility over the unbounded columns: `min Σe` with `a_jᵀy − e_j ≤ c_j`.
/// A positive optimum means the dual is infeasible.
fn dual_infeasible(form: &StandardForm, opts: &SolverOptions) -> Option<bool> {
    let free_cols: Vec<usize> = (0..form.n()).filter(|&j| !form.upper[j].is_finite()).collect();
    if free_cols.is_empty() {
        return Some(false);
    }
    let k = free_cols.len();
    let mut f = StandardForm { m: k, cols: Vec::new(), b: Vec::new(), c: Vec::new(), upper: Vec::new() };
    f.b = free_cols.iter().map(|&j| form.c[j]).collect();
    let mut row_entries = vec![Vec::new(); form.m];
    for (r, &j) in free_cols.iter().enumerate() {
        for &(i, a) in &form.cols[j] {
            row_entries[i].push((r, a));
        }
    }
    for entries in row_entries {
        let neg: Vec<(usize, f64)> = entries.iter().map(|&(r, a)| (r, -a)).collect();
        f.push_col(entries, 0.0, f64::INFINITY);
        f.push_col(neg, 0.0, f64::INFINITY);
    }
    for r in 0..k {
        f.push_col(vec![(r, -1.0)], 1.0, f64::INFINITY);
        f.push_col(vec![(r, 1.0)], 0.0, f64::INFINITY);
    }
    let r = run(&f, 0.0, &SolverOptions { tol: opts.tol.min(1e-9), ..*opts });
    settled(&r).then(|| r.objective > 1e-6 * (1.0 + inf_norm(&form.c)))
}

fn finish(lp: &LinearProgram, conv: &Conversion, status: LpStatus, core: &CoreResult) -> LpSolution {
    let x = conv.recover_x(&core.x);
    let duals = conv.recover_duals(&core.y);
    let mut reduced_costs = lp.objective.clone();
    for (row, &y) in lp.rows.iter().zip(&duals) {
        for &(j, a) in &row.coeffs {
            reduced_costs[j] -= a * y;
        }
    }
    let mut dual_objective = lp.offset + lp.rows.iter().zip(&duals).map(|(r, y)| r.rhs * y).sum::<f64>();
    for j in 0..lp.num_vars() {
        let rc = reduced_costs[j];
        if rc > 0.0 && lp.lower[j].is_finite() {
            dual_objective += rc * lp.lower[j];
        } else if rc < 0.0 && lp.upper[j].is_finite() {
            dual_objective += rc * lp.upper[j];
        }
    }
    LpSolution {
        status,
        objective: lp.objective_value(&x),
        x,
        duals,
        reduced_costs,
        dual_objective,
        iterations: core.iterations,
        residuals: core.residuals,
        trace: core.trace.clone(),
    }
}

pub(super) fn solve_program(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    let conv = standard::convert(lp);
    if conv.infeasible {
        return Ok(LpSolution::empty(LpStatus::Infeasible, lp));
    }
    if conv.form.n() == 0 {
        let core = CoreResult {
            exit: Exit::Converged,
            x: Vec::new(),
            y: Vec::new(),
            objective: conv.offset,
            iterations: 0,
            residuals: Residuals::default(),
            trace: Vec::new(),
        };
        let status = if conv.unbounded_column { LpStatus::Unbounded } else { LpStatus::Optimal };
        return Ok(finish(lp, &conv, status, &core));
    }

    let core = run(&conv.form, conv.offset, opts);
    if core.exit == Exit::Converged {
        if conv.unbounded_column {
            return Ok(LpSolution::empty(LpStatus::Unbounded, lp));
        }
        return Ok(finish(lp, &conv, LpStatus::Optimal, &core));
    }
    log::debug!("interior point stopped after {} iterations ({:?}); diagnosing", core.iterations, core.exit);
    match phase_one(&conv.form, opts) {
        Some(true) => return Ok(LpSolution::empty(LpStatus::Infeasible, lp)),
        Some(false) => {
            if conv.unbounded_column || dual_infeasible(&conv.form, opts) == Some(true) {
                return Ok(LpSolution::empty(LpStatus::Unbounded, lp));
            }
        }
        None => {}
    }
    if core.exit == Exit::Stalled && core.iterations == 0 {
        return Err(LpError::Singular);
    }
    Ok(finish(lp, &conv, LpStatus::IterationLimit, &core))
}
