//! Benchmark harnesses for the adaptive-gnc solvers: a Monte-Carlo robust
//! linear-regression study and a point-cloud alignment study, both with
//! deterministic seeding and CSV reporting.

pub mod config;
pub mod icp_bench;
pub mod linreg;
pub mod methods;
pub mod report;
pub mod rng;

pub use config::{IcpBenchConfig, LinRegConfig};
pub use icp_bench::run_icp_bench;
pub use linreg::{gen_linreg, run_linreg_mc};
pub use methods::Method;
