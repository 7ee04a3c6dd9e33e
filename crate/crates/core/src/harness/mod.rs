//! Configuration, network generation, closed-loop runs and plot data.

pub mod config;
pub mod generate;
pub mod report;
pub mod run;

pub use config::{Experiment, RunConfig};
pub use generate::{gen_network, GeometryParams};
pub use report::report;
pub use run::{simulate, simulate_many, RunSummary};
