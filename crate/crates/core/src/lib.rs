//! Greedy primal-dual scheduling for time-slotted wireless networks whose
//! arrival rates and state statistics are only observed through empirical
//! averages.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: links, states, allocation modes, routing and queue dynamics.
//! - [`stochastic`]: seeded arrival and state processes with bounded
//!   increments, plus cumulative trackers.
//! - [`objective`]: cost, constraints, penalty and their gradients.
//! - [`scheduler`]: the per-slot primal-dual scheduler and its empirical state.
//! - [`solver`]: a static conditional-gradient solver and an exact LP oracle.
//! - [`harness`]: configuration, network generation, simulation runs, CSV
//!   metrics and plot-data reports.

pub mod error;
pub mod harness;
pub mod model;
pub mod objective;
pub mod scheduler;
pub mod solver;
pub mod stochastic;

pub use error::{Error, Result};
