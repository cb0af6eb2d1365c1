//! Inertial projected gradient descent for nonlinearly constrained problems.
//!
//! The projection step solves the point-projection QP with an infeasible
//! active-set method that manipulates constraints in bulk and treats
//! variable bounds through a Schur complement. After projection the step is
//! split into components parallel and orthogonal to the constraint
//! gradients and rescaled from an estimate of the Lagrangian gradient.

pub mod active_set;
pub mod bench;
pub mod config;
pub mod constraints;
pub mod driver;
pub mod error;
pub mod oracle;
pub mod problem;
pub mod projection;
pub mod state;
pub mod topo;
pub mod vector;

pub use active_set::{ActiveSet, ConstraintId, MultiplierVector, Side};
pub use config::{DecompositionScope, HResetMode, InertiaScale, OptimizerConfig, PostGammaFeasibility, ProjectionConfig};
pub use constraints::{ConstraintKind, ConstraintModel, Evaluation, GlobalConstraint, LinearFunction, ScalarFunction, UnivariateBounds};
pub use driver::{optimize, step, History, StopReason};
pub use error::{PgdError, Result};
pub use problem::{check_gradient, make_appendix_problem, make_quadratic, AppendixProblem, Problem};
pub use state::{IterationRecord, OptimizerState};
pub use vector::DesignVector;
