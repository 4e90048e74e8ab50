//! Per-run convergence records.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Dsamd,
    Adsamd,
    CentralMd,
    CentralAmd,
    LocalMd,
    LocalAmd,
    DgdNaive,
    DgdMinibatch,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 8] = [
        AlgorithmKind::Dsamd,
        AlgorithmKind::Adsamd,
        AlgorithmKind::CentralMd,
        AlgorithmKind::CentralAmd,
        AlgorithmKind::LocalMd,
        AlgorithmKind::LocalAmd,
        AlgorithmKind::DgdNaive,
        AlgorithmKind::DgdMinibatch,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmKind::Dsamd => "dsamd",
            AlgorithmKind::Adsamd => "adsamd",
            AlgorithmKind::CentralMd => "central_md",
            AlgorithmKind::CentralAmd => "central_amd",
            AlgorithmKind::LocalMd => "local_md",
            AlgorithmKind::LocalAmd => "local_amd",
            AlgorithmKind::DgdNaive => "dgd_naive",
            AlgorithmKind::DgdMinibatch => "dgd_minibatch",
        }
    }

    pub fn is_accelerated(&self) -> bool {
        matches!(self, AlgorithmKind::Adsamd | AlgorithmKind::CentralAmd | AlgorithmKind::LocalAmd)
    }

    pub fn needs_mixing(&self) -> bool {
        matches!(self, AlgorithmKind::Dsamd | AlgorithmKind::Adsamd | AlgorithmKind::DgdNaive | AlgorithmKind::DgdMinibatch)
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AlgorithmKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::Parameter(format!("unknown algorithm {s:?}")))
    }
}

/// How much of each run is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceDetail {
    /// Node-averaged gap per recorded round, per-node gaps at the end.
    #[default]
    MeanOnly,
    /// Per-node gaps at every recorded round.
    PerNode,
    /// Per-node gaps plus the search and reported points of every round.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// Search-point round `s` (the record describes the state after it).
    pub round: usize,
    /// Data samples that arrived network-wide by the end of the round.
    pub samples_consumed: usize,
    pub mean_gap: f64,
    pub node_gaps: Option<Vec<f64>>,
    pub search_points: Option<Vec<Point>>,
    pub reported_points: Option<Vec<Point>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMeta {
    pub step_size: f64,
    pub prox_steps: usize,
    pub consensus_rounds_per_step: usize,
    pub consensus_rounds_total: usize,
    pub batch_size: usize,
    /// Samples that arrived but were never used (rounding or DGD discards),
    /// per node.
    pub discarded_samples: usize,
    /// `alpha / (2 L)` when a smoothness estimate was supplied.
    pub step_limit: Option<f64>,
    pub step_exceeds_limit: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    pub algorithm: AlgorithmKind,
    pub nodes: usize,
    pub rounds: Vec<RoundRecord>,
    pub final_node_gaps: Vec<f64>,
    pub final_points: Vec<Point>,
    pub meta: RunMeta,
}

impl ConvergenceTrace {
    pub fn final_mean_gap(&self) -> f64 {
        if self.final_node_gaps.is_empty() {
            return f64::NAN;
        }
        self.final_node_gaps.iter().sum::<f64>() / self.final_node_gaps.len() as f64
    }
}
