//! Distributed stochastic mirror descent over rate-limited networks.
//!
//! Nodes receive one data sample per data round and may exchange messages
//! with neighbours `rho` times per data round. D-SAMD and AD-SAMD group the
//! samples into mini-batches so that averaging the batch gradients across the
//! network fits in the communication budget.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod bounds;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod network;
pub mod oracle;
pub mod quadrature;
pub mod rng;
pub mod trace;
pub mod vector;

pub use algorithms::{make_schedule, run_adsamd, run_baseline, run_dsamd, BatchRule, Problem, RateSchedule, RunOptions};
pub use error::{Error, Result};
pub use geometry::{FeasibleSet, MirrorGeometry};
pub use network::{generate_topology, GraphFamily, MixingMatrix, MixingRule, Topology};
pub use oracle::{GroundTruth, LogisticTask, ObjectiveKind};
pub use trace::{AlgorithmKind, ConvergenceTrace, TraceDetail};
