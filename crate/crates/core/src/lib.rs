//! Finite-volume solver for phenotype-structured tumor growth driven by a
//! pressure law `p = ρ^γ`, together with the diagnostics and reference
//! solutions used to check the a priori estimates of the model numerically.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod grid;
pub mod initial;
pub mod oracles;
pub mod reaction;
pub mod solver;

pub use diagnostics::{DiagnosticsRecord, DiagnosticsSettings, FreeBoundary};
pub use error::{Error, Result};
pub use fields::{FractionField, PopulationField, PressureExponent, ScalarField};
pub use grid::{PhenotypeMesh, SpatialGrid};
pub use initial::{InitialData, Profile, Provenance};
pub use oracles::{BarenblattProfile, ConvergenceOrder};
pub use reaction::{MutationKernel, ReactionSpec, TabulatedRate};
pub use solver::{BoundaryPolicy, SimulationState, Solver, SolverConfig, Trajectory};
