//! Numerical laboratory for the Wright–Fisher diffusion with mutation.
//!
//! - [`model`], [`generator`], [`stationary`]: coefficients, Lyapunov test
//!   functions and their generator images, and the invariant Beta law.
//! - [`planner`]: constructive choices of `(m, α, C(m))` and `(κ, b₀, n)`, and
//!   the right-hand sides of the bounds they certify.
//! - [`sde`]: discretized paths, stopping times and boundary monitoring.
//! - [`estimators`]: Monte Carlo verdicts against those bounds.
//! - [`drift`]: pointwise checks of the underlying drift inequalities.
//! - [`config`], [`report`], [`cli`]: the batch command-line surface.

pub mod cli;
pub mod config;
pub mod drift;
pub mod error;
pub mod estimators;
pub mod generator;
pub mod model;
pub mod planner;
pub mod quadrature;
pub mod report;
pub mod sde;
pub mod stationary;

pub use error::{Error, Result};
pub use model::{diffusion, drift as drift_coefficient, feller_satisfied, ModelParams, StateValue};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
