//! Adapted optimal transport on finite scenario trees.
//!
//! Provides exact solvers for causal, bicausal and multicausal transport
//! between finitely supported adapted processes, together with the dual
//! side of each problem: structured potentials with martingale
//! compensators, value processes from the backward recursion, polar-set
//! certificates, robust superhedging prices with replicating strategies,
//! and causal barycenters over a fixed candidate support.
//!
//! The crate is `no_std` + `alloc`; all IO and file formats live in the
//! companion `adot-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod barycenter;
pub mod bicausal;
pub mod coupling;
pub mod cost;
pub mod dual;
pub mod error;
pub mod hedging;
pub mod lp;
pub mod polar;
pub mod process;
pub mod solver;
pub mod transport;

mod math;

/// Absolute tolerance for validating user-supplied inputs (probability
/// sums, martingale checks, value comparisons).
pub const INPUT_TOL: f64 = 1e-9;

/// Absolute tolerance for derived quantities (LP values, constraint
/// residuals, value-process identities).
pub const DERIVED_TOL: f64 = 1e-8;

/// Absolute tolerance for verified dual potentials (pointwise
/// feasibility and primal/dual agreement after telescoping).
pub const DUAL_TOL: f64 = 1e-7;

pub use coupling::{Coupling, CouplingReport, Mode};
pub use cost::CostFunction;
pub use dual::DualPotential;
pub use process::{FilteredProcess, NodeSpec, TransitionKernel};
