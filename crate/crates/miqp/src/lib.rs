//! Deterministic mixed-binary QP solver for problems with separable
//! (diagonal) quadratic objectives and sparse linear constraints.
//!
//! The crate is organized bottom-up: sparse CSC kernels, a signed LDL'
//! factorization for quasi-definite KKT systems, an ADMM-based convex QP
//! engine with certified Lagrangian bounds, and a branch-and-bound driver
//! that reuses the engine's factorization across the whole tree. MPS
//! import/export round-trips problems for cross-checks against external
//! solvers.

pub mod bb;
pub mod ldl;
pub mod mps;
pub mod problem;
pub mod qp;
pub mod sparse;

pub use bb::{
    solve_qp, warm_start_from, Branching, MiqpSolution, MiqpSolver, NodeSelection, QpSolution,
    QpSolveStatus, SolveStatus, SolverError, SolverOptions,
};
pub use mps::{export_mps, parse_mps, to_mps_string, MpsError};
pub use problem::{validate, Finding, MiqpProblem, Row, Sense, VarKind};
