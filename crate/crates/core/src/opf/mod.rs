//! Optimal power flow formulations.
//!
//! The DC model is assembled as a [`LinearProgram`](crate::lp::LinearProgram) and
//! solved in-process. The SOC relaxation and the polar AC model are produced as
//! structured [`Formulation`] documents for external solvers.

mod ac;
mod dc;
mod formulation;
mod soc;

use thiserror::Error;

use crate::lp::LpError;

pub use ac::{build_ac, AcOpfDescription};
pub use dc::{build_dc, DcOpfProblem, DC_FLOW_SIGN};
pub use formulation::{
    export_formulation, import_formulation, Constraint, Formulation, FormulationError, FormulationKind, Objective,
    Sense, VariableBlock, SCHEMA_VERSION,
};
pub use soc::{build_soc, soc_branch_coefficients, BranchGamma, Gamma, SocOpfDescription};

#[derive(Debug, Error, PartialEq)]
pub enum OpfError {
    #[error("{what} has {got} entries but the network has {expected} buses")]
    LoadLength { what: &'static str, got: usize, expected: usize },
    #[error("network references unknown bus {0}")]
    UnknownBus(u32),
    #[error("network has no reference bus")]
    NoReference,
    #[error(transparent)]
    Lp(#[from] LpError),
}

pub(crate) fn check_loads(what: &'static str, loads: &[f64], buses: usize) -> Result<(), OpfError> {
    if loads.len() != buses {
        return Err(OpfError::LoadLength { what, got: loads.len(), expected: buses });
    }
    Ok(())
}
