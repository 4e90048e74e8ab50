//! Experiment configuration, Monte Carlo sweeps and output files.

pub mod config;
pub mod emit;
pub mod stats;
pub mod sweep;

pub use config::{AlgorithmSpec, ExperimentConfig, Regime, TaskConfig};
pub use emit::{emit, read_trace_csv, slopes_from_rows, TraceRow};
pub use stats::{fit_slope, ordering_violation_rate};
pub use sweep::{run_sweep, SweepPoint, SweepResult};
