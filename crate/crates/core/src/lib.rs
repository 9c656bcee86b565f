//! Learning convex surrogates of optimal power flow value functions.
//!
//! The crate covers the whole pipeline: MATPOWER case ingestion ([`grid`]),
//! OPF formulation building ([`opf`]), an interior-point LP solver that
//! labels DC-OPF instances with values and nodal prices ([`lp`]), dataset
//! generation ([`datagen`]), input-convex networks and their training
//! ([`icnn`], [`trainer`]), generalization certificates ([`certify`]) and
//! optimality-gap reporting ([`evalkit`]).

pub mod certify;
pub mod datagen;
pub mod evalkit;
pub mod grid;
pub mod icnn;
pub mod jsonfmt;
pub mod lp;
pub mod opf;
pub mod trainer;
