use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algorithms::{BatchRule, CentralBatching};
use crate::bounds::MTerm;
use crate::error::{Error, Result};
use crate::geometry::{FeasibleSet, MirrorGeometry};
use crate::network::{GraphFamily, MixingRule};
use crate::oracle::{self, ObjectiveKind};
use crate::trace::{AlgorithmKind, TraceDetail};

/// How the horizon `T` grows with the network size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    TEqM,
    TEqSqrtM,
    Explicit { t: usize },
}

impl Regime {
    pub fn horizon(&self, m: usize) -> usize {
        match *self {
            Regime::TEqM => m,
            Regime::TEqSqrtM => ((m as f64).sqrt().round() as usize).max(1),
            Regime::Explicit { t } => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub kind: AlgorithmKind,
    pub gamma: f64,
    /// Clip the base step to `alpha / (2 L_est)`.
    #[serde(default)]
    pub clip: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskConfig {
    pub d: usize,
    pub sigma_r2: f64,
    pub label_prior: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig { d: oracle::DEFAULT_DIMENSION, sigma_r2: oracle::DEFAULT_SIGMA_R2, label_prior: oracle::DEFAULT_LABEL_PRIOR }
    }
}

fn default_rho() -> f64 {
    0.5
}
fn default_m_list() -> Vec<usize> {
    vec![4, 8, 16, 32, 64]
}
fn default_instances() -> usize {
    200
}
fn default_geometry() -> String {
    "euclidean".into()
}
fn default_radius() -> f64 {
    100.0
}
fn default_eval_every() -> usize {
    1
}
fn default_noise_samples() -> usize {
    20_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub graph: GraphFamily,
    /// Defaults to mean mixing on complete graphs and Metropolis otherwise.
    #[serde(default)]
    pub mixing: Option<MixingRule>,
    pub regime: Regime,
    #[serde(default = "default_m_list")]
    pub m_list: Vec<usize>,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub b_rule: BatchRule,
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default = "default_instances")]
    pub instance_count: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub task: TaskConfig,
    #[serde(default)]
    pub objective: ObjectiveKind,
    /// Directory for holdout caches; holdout sets are regenerated if unset.
    #[serde(default)]
    pub holdout_cache: Option<PathBuf>,
    #[serde(default = "default_geometry")]
    pub geometry: String,
    /// Radius of the centered Euclidean ball used as the feasible set.
    #[serde(default = "default_radius")]
    pub domain_radius: f64,
    #[serde(default)]
    pub central_batching: CentralBatching,
    #[serde(default)]
    pub detail: TraceDetail,
    /// Record every `eval_every`-th round; `0` records only the final round.
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    /// Lipschitz constant of the nonsmooth part, for the bound overlays.
    #[serde(default)]
    pub nonsmooth_lipschitz: f64,
    #[serde(default)]
    pub m_term: MTerm,
    /// Monte Carlo samples for the noise variance estimate at the origin.
    #[serde(default = "default_noise_samples")]
    pub noise_samples: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(format!("reading {}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.instance_count == 0 {
            return Err(Error::Config("instance_count must be >= 1".into()));
        }
        if self.m_list.is_empty() || self.m_list.contains(&0) {
            return Err(Error::Config("m_list must be nonempty with positive entries".into()));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Config(format!("rho must be positive, got {}", self.rho)));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms configured".into()));
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            if self.algorithms[..i].iter().any(|b| b.kind == a.kind) {
                return Err(Error::Config(format!("{} is listed twice", a.kind)));
            }
            if !(a.gamma >= 0.0 && a.gamma.is_finite()) {
                return Err(Error::Config(format!("{}: step size must be finite and >= 0", a.kind)));
            }
        }
        if self.task.d == 0 {
            return Err(Error::Config("task dimension must be >= 1".into()));
        }
        if let Regime::Explicit { t: 0 } = self.regime {
            return Err(Error::Config("explicit horizon must be >= 1".into()));
        }
        self.build_geometry()?;
        Ok(())
    }

    pub fn mixing_rule(&self) -> MixingRule {
        self.mixing.unwrap_or(match self.graph {
            GraphFamily::Complete => MixingRule::MeanForComplete,
            _ => MixingRule::Metropolis,
        })
    }

    pub fn build_geometry(&self) -> Result<MirrorGeometry> {
        let domain = FeasibleSet::centered_ball(self.task.d + 1, self.domain_radius)?;
        MirrorGeometry::from_name(&self.geometry, domain)
    }
}
