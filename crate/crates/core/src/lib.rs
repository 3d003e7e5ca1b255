//! Optimal control of underactuated mechanical systems in quasivelocities.
//!
//! The control problem is rewritten as a second-order variational problem
//! with constraints, and its necessary conditions are posed as a
//! Skinner–Rusk presymplectic system. The crate assembles that system,
//! checks when its first constraint submanifold is symplectic, integrates
//! the extremal flow, and solves the two-point boundary value problem by
//! shooting.
//!
//! Everything numerical is generic over [`Real`]; derivatives are taken with
//! nested [`Dual`] numbers or central differences ([`numdiff`]).

pub mod dual;
pub mod error;
pub mod flow;
pub mod linalg;
pub mod numdiff;
pub mod quasivel;
pub mod reduction;
pub mod scalar;
pub mod skinner_rusk;
pub mod systems;

pub use dual::Dual;
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use numdiff::{DiffConfig, DiffScheme};
pub use quasivel::{FramePoint, LagrangianForm, MechanicalSystem, SecondOrderPoint, StructureCoefficients};
pub use reduction::{ConstraintSolver, MPoint, ReducedProblem};
pub use scalar::Real;
pub use skinner_rusk::{RegularityReport, W0State, W1State};
pub use systems::{CostKind, PlanarRigidBody, PlanarRigidBodyParams, PointMassLq};
pub use flow::{
    flow_map, integrate, monitor_symplecticity, shoot, BvpSpec, IntegratorConfig, Method, ShootOutcome, Tolerances,
    TrajectoryLog,
};

pub type W0StateF64 = W0State<f64>;
pub type W0StateF32 = W0State<f32>;
pub type W1StateF64 = W1State<f64>;
pub type W1StateF32 = W1State<f32>;
pub type MatrixF64 = Matrix<f64>;
pub type MatrixF32 = Matrix<f32>;
pub type MPointF64 = MPoint<f64>;
pub type RegularityReportF64 = RegularityReport<f64>;
pub type TrajectoryLogF64 = TrajectoryLog<f64>;
pub type TrajectoryLogF32 = TrajectoryLog<f32>;
