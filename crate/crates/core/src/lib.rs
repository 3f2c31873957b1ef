//! Primal-dual interior point solver for conic problems over Cartesian
//! products of exotic cones.
//!
//! Problems are stated in the primal form
//!
//! ```text
//! min  c'x   s.t.  b - A x = 0,   h - G x ∈ K
//! ```
//!
//! and solved by following the central path of the homogeneous self-dual
//! embedding. Each cone only has to supply a feasibility check, gradient,
//! Hessian, third-order directional derivative (`too`) and an initial
//! interior point; see [`cones`].
//!
//! The main entry point is [`solver::solve`].

pub mod cones;
pub mod direction;
pub mod linalg;
pub mod model;
pub mod point;
pub mod solver;
pub mod stepper;

pub use cones::{ConeDescriptor, ConeError, ConeKind, OracleWorkspace};
pub use model::{ConicModel, ModelError};
pub use point::IteratePoint;
pub use solver::{solve, SolveResult, SolveStatus, SolverOptions};
pub use stepper::{StepperConfig, StepperMode};
