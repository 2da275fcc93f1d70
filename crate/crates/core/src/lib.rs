//! Co-rotating and traveling vortex-patch pairs for the generalized SQG equations.
//!
//! Each patch boundary is a polar graph R_i(x) = 1 + ε|ε|^α b_i^{1+α} p_i(x) around its
//! point-vortex position, with p_i an even cosine series without a mode-1 term. Newton
//! continuation in ε starts from the point-vortex equilibrium at ε = 0.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::excessive_precision)]

pub mod diagnostics;
pub mod error;
pub mod functionals;
pub mod io;
pub mod linearization;
pub mod quadrature;
pub mod solver;
pub mod special;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    BranchEntry, CollocationGrid, CosineSeries, Mode, PairGeometry, SineSeries, SolutionBranch, SolveState,
};
