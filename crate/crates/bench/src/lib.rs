//! Benchmark harness for `conic-core`: deterministic instance generators, a
//! suite runner over the stepping modes, and aggregate metrics written as CSV.

pub mod generators;
pub mod metrics;
pub mod suite;

pub use generators::{default_suite, generate, Instance, InstanceSpec, RiskCone, VolumeCone};
pub use metrics::{perf_profile, shifted_geomean, AggregateRow, AggregateSet, MetricsTable, RunRecord};
pub use suite::{read_runs_csv, run_suite, write_suite, SuiteOptions};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid instance spec: {0}")]
    Spec(String),
    #[error("generator failed: {0}")]
    Generator(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
