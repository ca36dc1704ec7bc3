//! Finite element solvers for the membrane obstacle problem in its Lagrange
//! multiplier formulation: a bubble-enriched mixed method, a residual
//! stabilized method, primal-dual active set and Nitsche/penalty iterations,
//! residual a posteriori error estimation with adaptive refinement, and a
//! closed-form radial benchmark for quantitative verification.

// index loops here mirror the element/dof arithmetic they implement, and
// quadrature constants keep their full published precision
#![allow(clippy::needless_range_loop)]
#![allow(clippy::excessive_precision)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod benchmark;
pub mod cli;
pub mod estimator;
pub mod fespace;
pub mod linalg;
pub mod mesh;
pub mod solver;

pub use assembly::{MixedSystem, ProblemData, StabilizedSystem};
pub use fespace::{DofMap, Family, SpaceSpec};
pub use linalg::SparseMatrix;
pub use mesh::Mesh;
pub use solver::{DiscreteSolution, SolverOptions, SolverReport};
