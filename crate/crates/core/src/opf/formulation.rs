//! Portable, schema-versioned description of an OPF model.
//!
//! Variables live in one flat index space split into named blocks. A constraint
//! whose `kind` is not one of the nonlinear kinds below is linear:
//! `Σ coefficients[k] · x[indices[k]]  (sense)  rhs`.
//!
//! | kind            | indices                                  | coefficients                |
//! |-----------------|------------------------------------------|-----------------------------|
//! | `power_balance` | `vm, (p, q)…`                            | `pd, qd, gs, bs, sign…`     |
//! | `ohm_from`      | `p, q, vm_i, vm_j, va_i, va_j`           | `g, b, gc, bc` (from end)   |
//! | `ohm_to`        | `p, q, vm_i, vm_j, va_i, va_j`           | `g, b, gc, bc` (to end)     |
//! | `thermal`       | `p, q`                                   | `smax`, or empty if unlimited |
//! | `jabr`          | `wr, wi, w_i, w_j`                       | none                        |
//!
//! `power_balance` reads `Σ sign·(p + jq) − (pd + j qd) − (gs + j bs)* vm² = 0`,
//! with `+1` signs on generator pairs and `−1` on branch flows leaving the bus.
//! The Ohm kinds are the polar AC flow equations; `thermal` is `p² + q² ≤ smax²`
//! and `jabr` is `wr² + wi² ≤ w_i w_j`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::DcOpfProblem;
use crate::jsonfmt;
use crate::lp::{LinearProgram, RowKind};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormulationKind {
    Dc,
    Soc,
    Ac,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Eq,
    Le,
    Ge,
}

impl From<RowKind> for Sense {
    fn from(k: RowKind) -> Self {
        match k {
            RowKind::Eq => Sense::Eq,
            RowKind::Ge => Sense::Ge,
            RowKind::Le => Sense::Le,
        }
    }
}

impl From<Sense> for RowKind {
    fn from(s: Sense) -> Self {
        match s {
            Sense::Eq => RowKind::Eq,
            Sense::Ge => RowKind::Ge,
            Sense::Le => RowKind::Le,
        }
    }
}

/// Contiguous run of variables; `None` bounds are infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableBlock {
    pub name: String,
    pub start: usize,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

impl VariableBlock {
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn index(&self, k: usize) -> usize {
        self.start + k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub kind: String,
    pub sense: Sense,
    pub indices: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub rhs: f64,
}

impl Constraint {
    pub fn linear(kind: &str, sense: Sense, terms: &[(usize, f64)], rhs: f64) -> Self {
        Self {
            kind: kind.to_string(),
            sense,
            indices: terms.iter().map(|t| t.0).collect(),
            coefficients: terms.iter().map(|t| t.1).collect(),
            rhs,
        }
    }

    pub fn is_linear(&self) -> bool {
        !NONLINEAR_KINDS.contains(&self.kind.as_str())
    }
}

const NONLINEAR_KINDS: [&str; 5] = ["power_balance", "ohm_from", "ohm_to", "thermal", "jabr"];

/// Linear objective `min Σ coefficients[k] · x[indices[k]] + constant`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub sense: String,
    pub indices: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Formulation {
    pub schema_version: u32,
    pub formulation: FormulationKind,
    pub variables: Vec<VariableBlock>,
    pub constraints: Vec<Constraint>,
    pub objective: Objective,
}

#[derive(Debug, Error, PartialEq)]
pub enum FormulationError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("unsupported schema_version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn bound(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl Formulation {
    pub fn num_vars(&self) -> usize {
        self.variables.iter().map(|b| b.len()).sum()
    }

    pub fn block(&self, name: &str) -> Option<&VariableBlock> {
        self.variables.iter().find(|b| b.name == name)
    }

    pub fn count_kind(&self, kind: &str) -> usize {
        self.constraints.iter().filter(|c| c.kind == kind).count()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.constant
            + self.objective.indices.iter().zip(&self.objective.coefficients).map(|(&i, c)| c * x[i]).sum::<f64>()
    }

    /// Exports a DC program with named blocks `pg`, `va`, `pf`.
    pub fn from_dc(dc: &DcOpfProblem) -> Self {
        let lp = &dc.lp;
        let block = |name: &str, r: &std::ops::Range<usize>| VariableBlock {
            name: name.to_string(),
            start: r.start,
            lower: r.clone().map(|j| bound(lp.lower[j])).collect(),
            upper: r.clone().map(|j| bound(lp.upper[j])).collect(),
        };
        let variables = vec![block("pg", &dc.gen_cols), block("va", &dc.angle_cols), block("pf", &dc.flow_cols)];
        let mut kinds = vec!["angle_diff"; lp.num_rows()];
        for &r in &dc.balance_rows {
            kinds[r] = "balance";
        }
        for &r in &dc.ohm_rows {
            kinds[r] = "ohm";
        }
        kinds[dc.ref_row] = "ref_angle";
        let constraints = lp
            .rows
            .iter()
            .zip(kinds)
            .map(|(row, kind)| Constraint::linear(kind, row.kind.into(), &row.coeffs, row.rhs))
            .collect();
        let objective = Objective {
            sense: "min".into(),
            indices: dc.gen_cols.clone().collect(),
            coefficients: lp.objective[dc.gen_cols.clone()].to_vec(),
            constant: lp.offset,
        };
        Self { schema_version: SCHEMA_VERSION, formulation: FormulationKind::Dc, variables, constraints, objective }
    }

    /// Rebuilds a linear program; fails if any constraint is nonlinear.
    pub fn to_lp(&self) -> Result<LinearProgram, FormulationError> {
        let mut lp = LinearProgram::new(self.num_vars());
        for b in &self.variables {
            for k in 0..b.len() {
                let lo = b.lower[k].unwrap_or(f64::NEG_INFINITY);
                let hi = b.upper[k].unwrap_or(f64::INFINITY);
                lp.set_bounds(b.index(k), lo, hi);
            }
        }
        for (&i, &c) in self.objective.indices.iter().zip(&self.objective.coefficients) {
            lp.objective[i] += c;
        }
        lp.offset = self.objective.constant;
        for (n, c) in self.constraints.iter().enumerate() {
            if !c.is_linear() {
                return Err(FormulationError::Invalid {
                    path: format!("constraints[{n}].kind"),
                    message: format!("{} is not linear", c.kind),
                });
            }
            let coeffs = c.indices.iter().copied().zip(c.coefficients.iter().copied()).collect();
            lp.add_row(coeffs, c.sense.into(), c.rhs);
        }
        Ok(lp)
    }

    /// Amount by which `x` violates constraint `c` (zero when satisfied).
    pub fn violation(c: &Constraint, x: &[f64]) -> f64 {
        let at = |k: usize| x[c.indices[k]];
        match c.kind.as_str() {
            "power_balance" => {
                let [pd, qd, gs, bs] = [c.coefficients[0], c.coefficients[1], c.coefficients[2], c.coefficients[3]];
                let vm = at(0);
                let mut s = -Complex64::new(pd, qd) - Complex64::new(gs, bs).conj() * vm * vm;
                for (pair, sign) in c.coefficients[4..].iter().enumerate() {
                    s += sign * Complex64::new(at(1 + 2 * pair), at(2 + 2 * pair));
                }
                s.norm()
            }
            "ohm_from" | "ohm_to" => {
                let y = Complex64::new(c.coefficients[0], c.coefficients[1]);
                let yc = Complex64::new(c.coefficients[2], c.coefficients[3]);
                let (vi, vj, ai, aj) = (at(2), at(3), at(4), at(5));
                let vv = Complex64::from_polar(vi * vj, ai - aj);
                let s = if c.kind == "ohm_from" {
                    (y + yc).conj() * vi * vi - y.conj() * vv
                } else {
                    (y + yc).conj() * vj * vj - y.conj() * vv.conj()
                };
                (Complex64::new(at(0), at(1)) - s).norm()
            }
            "thermal" => match c.coefficients.first() {
                Some(&smax) => (at(0).hypot(at(1)) - smax).max(0.0),
                None => 0.0,
            },
            "jabr" => (at(0) * at(0) + at(1) * at(1) - at(2) * at(3)).max(0.0),
            _ => {
                let act: f64 = c.indices.iter().zip(&c.coefficients).map(|(&i, a)| a * x[i]).sum();
                match c.sense {
                    Sense::Eq => (act - c.rhs).abs(),
                    Sense::Ge => (c.rhs - act).max(0.0),
                    Sense::Le => (act - c.rhs).max(0.0),
                }
            }
        }
    }

    /// Largest violation over all constraints and variable bounds.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = self.constraints.iter().map(|c| Self::violation(c, x)).fold(0.0, f64::max);
        for b in &self.variables {
            for k in 0..b.len() {
                let v = x[b.index(k)];
                if let Some(lo) = b.lower[k] {
                    worst = worst.max(lo - v);
                }
                if let Some(hi) = b.upper[k] {
                    worst = worst.max(v - hi);
                }
            }
        }
        worst
    }

    fn check(&self) -> Result<(), FormulationError> {
        let invalid = |path: String, message: String| Err(FormulationError::Invalid { path, message });
        if self.schema_version != SCHEMA_VERSION {
            return Err(FormulationError::Version { found: self.schema_version, expected: SCHEMA_VERSION });
        }
        let mut next = 0;
        for (k, b) in self.variables.iter().enumerate() {
            if b.start != next {
                return invalid(format!("variables[{k}].start"), format!("expected {next}, got {}", b.start));
            }
            if b.upper.len() != b.lower.len() {
                return invalid(format!("variables[{k}].upper"), "length differs from lower".into());
            }
            next += b.len();
        }
        let n = next;
        for (k, c) in self.constraints.iter().enumerate() {
            if let Some(&i) = c.indices.iter().find(|&&i| i >= n) {
                return invalid(format!("constraints[{k}].indices"), format!("index {i} out of range for {n} variables"));
            }
            let arity_ok = match c.kind.as_str() {
                "power_balance" => {
                    c.coefficients.len() >= 4 && c.indices.len() == 1 + 2 * (c.coefficients.len() - 4)
                }
                "ohm_from" | "ohm_to" => c.indices.len() == 6 && c.coefficients.len() == 4,
                "thermal" => c.indices.len() == 2 && c.coefficients.len() <= 1,
                "jabr" => c.indices.len() == 4,
                _ => c.indices.len() == c.coefficients.len(),
            };
            if !arity_ok {
                return invalid(format!("constraints[{k}]"), format!("malformed {} record", c.kind));
            }
        }
        if self.objective.indices.len() != self.objective.coefficients.len() {
            return invalid("objective".into(), "indices and coefficients differ in length".into());
        }
        if let Some(&i) = self.objective.indices.iter().find(|&&i| i >= n) {
            return invalid("objective.indices".into(), format!("index {i} out of range"));
        }
        Ok(())
    }
}

/// Serializes with fixed field order and 17 significant digits.
pub fn export_formulation(f: &Formulation) -> String {
    jsonfmt::to_document(f).expect("formulation serializes")
}

pub fn import_formulation(text: &str) -> Result<Formulation, FormulationError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| FormulationError::Json(e.to_string()))?;
    let version = value.get("schema_version").and_then(|v| v.as_u64());
    match version {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        Some(v) => return Err(FormulationError::Version { found: v as u32, expected: SCHEMA_VERSION }),
        None => {
            return Err(FormulationError::Invalid { path: "schema_version".into(), message: "missing".into() });
        }
    }
    let f: Formulation = serde_json::from_value(value).map_err(|e| FormulationError::Json(e.to_string()))?;
    f.check()?;
    Ok(f)
}
