//! Learning interactive multi-agent policies from demonstrations.
//!
//! The pipeline has two stages: fit per-agent generative policies with
//! standard imitation learning, then learn a pairwise interaction cost whose
//! mixed-strategy Nash equilibrium reshapes those policies. An iterative
//! linear-quadratic game solver provides the expert demonstrations and the
//! closed-loop benchmark opponents.
//!
//! The numeric core is generic over the scalar type ([`Scalar`], `f32` or
//! `f64`); the aliases below pin the benchmark pipeline at `f64`.

pub mod dynamics;
pub mod ilqgames;
pub mod error;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Dense array at benchmark precision.
pub type Tensor = tensor::Tensor<f64>;
/// Recording tape at benchmark precision.
pub type Tape = tensor::Tape<f64>;
/// Agent pose at benchmark precision.
pub type AgentState = dynamics::AgentState<f64>;
/// Control input at benchmark precision.
pub type Control = dynamics::Control<f64>;
/// State-control history at benchmark precision.
pub type Trajectory = dynamics::Trajectory<f64>;
