//! Semidefinite programming: a generic first-order conic engine and the
//! Lovász theta program built on it.

pub mod conic;
pub mod theta;

pub use conic::{
    solve_conic, BlockValue, Cone, ConicOptions, ConicProblem, ConicSolution, LinearConstraint,
    Term,
};
pub use theta::{classify_recovery, solve_theta, Recovery, ThetaSolution};
