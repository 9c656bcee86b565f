//! Reduction of a general [`LinearProgram`] to `min cᵀx, Ax = b, 0 ≤ x ≤ u`.

use super::{LinearProgram, RowKind};

/// Column-oriented standard-form program. `upper[j] = ∞` means no upper bound.
#[derive(Debug, Clone)]
pub(super) struct StandardForm {
    pub m: usize,
    pub cols: Vec<Vec<(usize, f64)>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub upper: Vec<f64>,
}

impl StandardForm {
    pub fn n(&self) -> usize {
        self.cols.len()
    }

    pub fn push_col(&mut self, entries: Vec<(usize, f64)>, cost: f64, upper: f64) -> usize {
        self.cols.push(entries);
        self.c.push(cost);
        self.upper.push(upper);
        self.cols.len() - 1
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (col, &xj) in self.cols.iter().zip(x) {
            if xj != 0.0 {
                for &(i, a) in col {
                    out[i] += a * xj;
                }
            }
        }
        out
    }

    pub fn mul_t(&self, y: &[f64]) -> Vec<f64> {
        self.cols.iter().map(|col| col.iter().map(|&(i, a)| a * y[i]).sum()).collect()
    }
}

/// How a user variable is recovered from standard-form columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(super) enum VarMap {
    /// Fixed by equal bounds, or absent from every row and set to its best bound.
    Constant(f64),
    /// `x = lower + col`
    Shift { col: usize, lower: f64 },
    /// `x = upper − col`
    Flip { col: usize, upper: f64 },
    /// `x = pos − neg`
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone)]
pub(super) struct Conversion {
    pub form: StandardForm,
    pub vars: Vec<VarMap>,
    /// Standard-form row for each user row; `None` for rows emptied by presolve.
    pub rows: Vec<Option<usize>>,
    pub offset: f64,
    /// Presolve proved infeasibility (crossed bounds or an unsatisfiable empty row).
    pub infeasible: bool,
    /// A variable absent from every row improves without bound along its cost.
    pub unbounded_column: bool,
}

impl Conversion {
    pub fn recover_x(&self, xs: &[f64]) -> Vec<f64> {
        self.vars
            .iter()
            .map(|m| match *m {
                VarMap::Constant(v) => v,
                VarMap::Shift { col, lower } => lower + xs[col],
                VarMap::Flip { col, upper } => upper - xs[col],
                VarMap::Split { pos, neg } => xs[pos] - xs[neg],
            })
            .collect()
    }

    pub fn recover_duals(&self, ys: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.map_or(0.0, |i| ys[i])).collect()
    }
}

pub(super) fn convert(lp: &LinearProgram) -> Conversion {
    let n = lp.num_vars();
    let mut occurs = vec![false; n];
    for row in &lp.rows {
        for &(j, a) in &row.coeffs {
            if a != 0.0 {
                occurs[j] = true;
            }
        }
    }

    let mut form = StandardForm { m: 0, cols: Vec::new(), b: Vec::new(), c: Vec::new(), upper: Vec::new() };
    let mut vars = Vec::with_capacity(n);
    let mut offset = lp.offset;
    let mut infeasible = false;
    let mut unbounded_column = false;

    for j in 0..n {
        let (l, u, c) = (lp.lower[j], lp.upper[j], lp.objective[j]);
        if l > u {
            infeasible = true;
        }
        let map = if l == u {
            VarMap::Constant(l)
        } else if !occurs[j] {
            let v = if c > 0.0 {
                l
            } else if c < 0.0 {
                u
            } else if l.is_finite() {
                l
            } else if u.is_finite() {
                u
            } else {
                0.0
            };
            if !v.is_finite() {
                unbounded_column = true;
                VarMap::Constant(0.0)
            } else {
                VarMap::Constant(v)
            }
        } else if l.is_finite() {
            VarMap::Shift { col: form.push_col(Vec::new(), c, u - l), lower: l }
        } else if u.is_finite() {
            VarMap::Flip { col: form.push_col(Vec::new(), -c, f64::INFINITY), upper: u }
        } else {
            let pos = form.push_col(Vec::new(), c, f64::INFINITY);
            let neg = form.push_col(Vec::new(), -c, f64::INFINITY);
            VarMap::Split { pos, neg }
        };
        match map {
            VarMap::Constant(v) => offset += c * v,
            VarMap::Shift { lower, .. } => offset += c * lower,
            VarMap::Flip { upper, .. } => offset += c * upper,
            VarMap::Split { .. } => {}
        }
        vars.push(map);
    }

    let mut rows = Vec::with_capacity(lp.num_rows());
    for row in &lp.rows {
        let mut rhs = row.rhs;
        let mut entries: Vec<(usize, f64)> = Vec::new();
        let mut add = |col: usize, a: f64| match entries.iter_mut().find(|e| e.0 == col) {
            Some(e) => e.1 += a,
            None => entries.push((col, a)),
        };
        for &(j, a) in &row.coeffs {
            if a == 0.0 {
                continue;
            }
            match vars[j] {
                VarMap::Constant(v) => rhs -= a * v,
                VarMap::Shift { col, lower } => {
                    rhs -= a * lower;
                    add(col, a);
                }
                VarMap::Flip { col, upper } => {
                    rhs -= a * upper;
                    add(col, -a);
                }
                VarMap::Split { pos, neg } => {
                    add(pos, a);
                    add(neg, -a);
                }
            }
        }
        entries.retain(|e| e.1 != 0.0);
        if entries.is_empty() {
            let slack_tol = 1e-9 * (1.0 + row.rhs.abs());
            let ok = match row.kind {
                RowKind::Eq => rhs.abs() <= slack_tol,
                RowKind::Ge => rhs <= slack_tol,
                RowKind::Le => rhs >= -slack_tol,
            };
            infeasible |= !ok;
            rows.push(None);
            continue;
        }
        let i = form.m;
        form.m += 1;
        form.b.push(rhs);
        for (col, a) in entries {
            form.cols[col].push((i, a));
        }
        match row.kind {
            RowKind::Eq => {}
            RowKind::Ge => {
                form.push_col(vec![(i, -1.0)], 0.0, f64::INFINITY);
            }
            RowKind::Le => {
                form.push_col(vec![(i, 1.0)], 0.0, f64::INFINITY);
            }
        }
        rows.push(Some(i));
    }

    Conversion { form, vars, rows, offset, infeasible, unbounded_column }
}
