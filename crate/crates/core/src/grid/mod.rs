//! Power network data model and MATPOWER case ingestion.
//!
//! Every electrical quantity held by a [`PowerNetwork`] is in per-unit on the
//! network's `base_mva`; angles are in radians. Out-of-service branches and
//! generators are dropped at parse time.

mod parse;
mod validate;

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use parse::{parse_case, ParseError};
pub use validate::{validate, Violation, ViolationCode};

/// External bus number as it appears in the case file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BusId(pub u32);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Pq,
    Pv,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    pub kind: BusKind,
    pub vmin: f64,
    pub vmax: f64,
    /// Shunt admittance `g^s + j b^s`.
    pub shunt: Complex64,
    pub base_kv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: BusId,
    pub to: BusId,
    pub r: f64,
    pub x: f64,
    /// Series admittance `1 / (r + j x)`.
    pub admittance: Complex64,
    /// Shunt admittance at the from end (half the total line charging).
    pub charging_from: Complex64,
    /// Shunt admittance at the to end.
    pub charging_to: Complex64,
    /// Thermal limit; `None` when the case file leaves it unlimited.
    pub rate: Option<f64>,
    /// Lower limit on `θ_from − θ_to`, radians.
    pub angle_min: Option<f64>,
    /// Upper limit on `θ_from − θ_to`, radians.
    pub angle_max: Option<f64>,
    /// Off-nominal tap ratio (parsed, not used by the formulations).
    pub tap: f64,
    /// Phase shift in radians (parsed, not used by the formulations).
    pub shift: f64,
}

impl Branch {
    /// Series susceptance `b = Im(Y)`.
    pub fn susceptance(&self) -> f64 {
        self.admittance.im
    }
}

/// Polynomial generation cost in currency per p.u.-hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenCost {
    pub linear: f64,
    pub quadratic: f64,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: BusId,
    pub pmin: f64,
    pub pmax: f64,
    pub qmin: f64,
    pub qmax: f64,
    pub cost: GenCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Load {
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerNetwork {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    /// Demand per bus, aligned with `buses`.
    pub loads: Vec<Load>,
    /// The unique reference bus, when the file declares exactly one.
    pub slack_bus: Option<BusId>,
}

impl PowerNetwork {
    /// Maps external bus numbers to positions in `buses`.
    pub fn bus_indices(&self) -> HashMap<BusId, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    pub fn reference_pd(&self) -> Vec<f64> {
        self.loads.iter().map(|l| l.p).collect()
    }

    pub fn reference_qd(&self) -> Vec<f64> {
        self.loads.iter().map(|l| l.q).collect()
    }

    pub fn total_pd(&self) -> f64 {
        self.loads.iter().map(|l| l.p).sum()
    }

    pub fn stats(&self) -> NetworkStats {
        NetworkStats {
            name: self.name.clone(),
            buses: self.buses.len(),
            branches: self.branches.len(),
            generators: self.generators.len(),
            total_load_mw: self.total_pd() * self.base_mva,
            capacity_mw: self.generators.iter().map(|g| g.pmax).sum::<f64>() * self.base_mva,
        }
    }
}

/// Summary counts in the spirit of a test-case statistics table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkStats {
    pub name: String,
    pub buses: usize,
    pub branches: usize,
    pub generators: usize,
    pub total_load_mw: f64,
    pub capacity_mw: f64,
}

impl fmt::Display for NetworkStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "system      {}", self.name)?;
        writeln!(f, "buses       {}", self.buses)?;
        writeln!(f, "branches    {}", self.branches)?;
        writeln!(f, "generators  {}", self.generators)?;
        writeln!(f, "load (MW)   {:.2}", self.total_load_mw)?;
        write!(f, "capacity    {:.2}", self.capacity_mw)
    }
}
