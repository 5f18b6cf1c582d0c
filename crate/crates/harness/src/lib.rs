//! Experiment driver for the MiniDyn VM.
//!
//! Runs a corpus of benchmark programs across execution modes and version
//! limits, collects counters, and writes reports. Also provides the
//! randomized program generator and the analysis soundness checker used by
//! the test suites.

pub mod check;
pub mod corpus;
pub mod randprog;
pub mod report;
pub mod soundness;
pub mod suite;

pub use corpus::Benchmark;
pub use report::{emit_report, Format};
pub use suite::{run_suite, ExperimentConfig, Row, StatsReport};
