//! Optimal designs for discriminating between rival regression models.
//!
//! Given a true mean function and a rival model family on a design interval,
//! this crate computes designs that maximize the minimal lack of fit of the
//! rival family (T-optimality), determinant-ratio designs for nested models
//! (D_s), and Kullback-Leibler discrimination designs for heteroscedastic
//! Gaussian observations. It characterizes the full set of optimal designs
//! through best uniform approximation (Remez exchange and its weighted and
//! nonlinear variants), enumerates the optimal-design polytope, verifies
//! candidate designs against equivalence conditions, and validates designs by
//! Monte Carlo power and mean-squared-error simulation.
//!
//! Entry points:
//! - [`solvers::solve_t_chebyshev`], [`solvers::solve_t_exchange`],
//!   [`solvers::solve_kl_exchange`], [`solvers::solve_ds`] compute designs;
//! - [`solvers::enumerate_t_optimal`] describes all T-optimal designs;
//! - [`solvers::verify_t_optimal`] checks optimality of any candidate;
//! - [`simulate::simulate_power`] and [`simulate::simulate_mse`] run
//!   reproducible simulation studies;
//! - [`cli::run`] backs the `discrimdes` binary.
//!
//! The `examples/` directory contains one runnable program per capability.

pub mod approx;
pub mod cli;
pub mod criteria;
pub mod design;
mod error;
pub mod linalg;
pub mod models;
pub mod simulate;
pub mod solvers;

pub use design::{Design, DesignSpace, ExactDesign};
pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
