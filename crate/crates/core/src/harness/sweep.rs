use serde::Serialize;

use crate::algorithms::{make_schedule, run_baseline, Problem, RateSchedule, RunOptions};
use crate::bounds::{self, BoundInputs, GapBound, ProblemConstants};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::stats;
use crate::network::{generate_topology, MixingMatrix, Topology};
use crate::oracle::{GroundTruth, LogisticTask, ObjectiveKind};
use crate::rng::{derive_seed, tags};
use crate::trace::{AlgorithmKind, ConvergenceTrace};

pub fn instance_seed(master: u64, m: usize, instance: usize) -> u64 {
    derive_seed(&[master, tags::INSTANCE, m as u64, instance as u64])
}

#[derive(Debug, Clone)]
pub struct InstanceRun {
    pub instance: usize,
    pub seed: u64,
    pub lambda2: f64,
    pub rejected_draws: usize,
    /// `i j` lines of the instance's graph.
    pub edge_list: String,
    pub schedule: RateSchedule,
    /// In configuration order.
    pub traces: Vec<ConvergenceTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub algorithm: AlgorithmKind,
    pub mean_final_gap: f64,
    pub stderr: f64,
}

/// Theoretical quantities for one sweep point, computed from instance 0's
/// constants and the mean `lambda2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Overlay {
    /// `1 / sqrt(mT)`.
    pub reference: f64,
    pub smoothness: f64,
    pub sigma2: f64,
    pub lambda2_mean: f64,
    /// Bounds at `S = 1..=S_max`, keyed by position.
    pub dsamd: Vec<GapBound>,
    pub adsamd: Vec<GapBound>,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub m: usize,
    pub horizon: usize,
    pub instances: Vec<InstanceRun>,
    pub aggregates: Vec<Aggregate>,
    pub overlay: Overlay,
}

impl SweepPoint {
    pub fn final_gaps(&self, kind: AlgorithmKind) -> Option<Vec<f64>> {
        let pos = self.instances.first()?.traces.iter().position(|t| t.algorithm == kind)?;
        Some(self.instances.iter().map(|r| r.traces[pos].final_mean_gap()).collect())
    }

    pub fn aggregate(&self, kind: AlgorithmKind) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.algorithm == kind)
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn run_count(&self) -> usize {
        self.points.iter().map(|p| p.instances.iter().map(|r| r.traces.len()).sum::<usize>()).sum()
    }

    /// Log-log slope of the mean final gap against `mT` over the sweep
    /// points, if at least three are available.
    pub fn slope(&self, kind: AlgorithmKind) -> Option<f64> {
        let pts: Vec<(f64, f64)> =
            self.points.iter().filter_map(|p| p.aggregate(kind).map(|a| ((p.m * p.horizon) as f64, a.mean_final_gap))).collect();
        stats::fit_slope(&pts).ok()
    }
}

struct Network {
    topology: Topology,
    mixing: MixingMatrix,
}

fn build_network(config: &ExperimentConfig, m: usize, seed: u64) -> Result<Network> {
    if m == 1 {
        return Ok(Network { topology: Topology::single(), mixing: MixingMatrix::trivial() });
    }
    let topology = generate_topology(config.graph, m, seed)?;
    let mixing = MixingMatrix::build(&topology, config.mixing_rule())?;
    Ok(Network { topology, mixing })
}

fn build_truth(config: &ExperimentConfig, task: &LogisticTask, seed: u64) -> Result<GroundTruth> {
    let holdout_seed = derive_seed(&[seed, tags::HOLDOUT]);
    let (ObjectiveKind::Holdout { samples }, Some(dir)) = (config.objective, config.holdout_cache.as_deref()) else {
        return Ok(GroundTruth::build(task, config.objective, holdout_seed));
    };
    if let Ok(truth) = GroundTruth::load_holdout(task, samples, holdout_seed, dir) {
        return Ok(truth);
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let truth = GroundTruth::build(task, config.objective, holdout_seed);
    truth.save_holdout(dir)?;
    Ok(truth)
}

fn run_instance(config: &ExperimentConfig, m: usize, horizon: usize, instance: usize, shared: Option<&Network>) -> Result<InstanceRun> {
    let seed = instance_seed(config.master_seed, m, instance);
    let fresh;
    let network = match shared {
        Some(n) => n,
        None => {
            fresh = build_network(config, m, derive_seed(&[seed, tags::TOPOLOGY]))?;
            &fresh
        }
    };
    let lambda2 = network.mixing.lambda2();
    let schedule = make_schedule(config.rho, horizon, config.b_rule, lambda2, m)?;
    let task = LogisticTask::generate(config.task.d, config.task.sigma_r2, config.task.label_prior, seed)?;
    let geometry = config.build_geometry()?;
    let mut truth = build_truth(config, &task, seed)?;
    truth.prepare(geometry.domain())?;
    let problem = Problem { task, geometry, truth };
    let smoothness = problem.task.smoothness_estimate();
    let traces = config
        .algorithms
        .iter()
        .map(|spec| {
            let options = RunOptions {
                detail: config.detail,
                eval_every: config.eval_every,
                smoothness: Some(smoothness),
                clip_to_smoothness: spec.clip,
                central_batching: config.central_batching,
            };
            run_baseline(spec.kind, &problem, Some(&network.mixing), &schedule, spec.gamma, &options)
                .map_err(|e| e.context(format!("{}", spec.kind)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InstanceRun {
        instance,
        seed,
        lambda2,
        rejected_draws: network.topology.rejected_draws(),
        edge_list: network.topology.edge_list(),
        schedule,
        traces,
    })
}

#[cfg(feature = "parallel")]
fn run_instances(config: &ExperimentConfig, m: usize, horizon: usize, shared: Option<&Network>) -> Result<Vec<InstanceRun>> {
    use rayon::prelude::*;
    (0..config.instance_count)
        .into_par_iter()
        .map(|i| run_instance(config, m, horizon, i, shared).map_err(|e| e.context(format!("m = {m}, instance {i}"))))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn run_instances(config: &ExperimentConfig, m: usize, horizon: usize, shared: Option<&Network>) -> Result<Vec<InstanceRun>> {
    (0..config.instance_count)
        .map(|i| run_instance(config, m, horizon, i, shared).map_err(|e| e.context(format!("m = {m}, instance {i}"))))
        .collect()
}

fn overlay(config: &ExperimentConfig, m: usize, horizon: usize, runs: &[InstanceRun]) -> Result<Overlay> {
    let first = &runs[0];
    let task = LogisticTask::generate(config.task.d, config.task.sigma_r2, config.task.label_prior, first.seed)?;
    let geometry = config.build_geometry()?;
    let smoothness = task.smoothness_estimate();
    let origin = vec![0.0; task.dimension()];
    let sigma2 = task.estimate_noise_variance(&origin, config.noise_samples, derive_seed(&[first.seed, tags::NOISE_PROBE]));
    let lambda2_mean = runs.iter().map(|r| r.lambda2).sum::<f64>() / runs.len() as f64;
    let constants = ProblemConstants::from_geometry(&geometry, smoothness, config.nonsmooth_lipschitz, sigma2)?;
    let gamma_of = |kind| config.algorithms.iter().find(|a| a.kind == kind).map_or(1.0, |a| a.gamma);
    let sched = first.schedule;
    let mut dsamd = Vec::with_capacity(sched.rounds);
    let mut adsamd = Vec::with_capacity(sched.rounds);
    for s in 1..=sched.rounds {
        let base = BoundInputs { m, lambda2: lambda2_mean, r: sched.consensus_rounds, b: sched.batch, s, gamma: 0.0 };
        dsamd.push(bounds::gap_bound_dsamd(&constants, &BoundInputs { gamma: gamma_of(AlgorithmKind::Dsamd), ..base }, config.m_term)?);
        adsamd.push(bounds::gap_bound_adsamd(&constants, &BoundInputs { gamma: gamma_of(AlgorithmKind::Adsamd), ..base }, config.m_term)?);
    }
    Ok(Overlay { reference: 1.0 / ((m * horizon) as f64).sqrt(), smoothness, sigma2, lambda2_mean, dsamd, adsamd })
}

pub fn run_point(config: &ExperimentConfig, m: usize) -> Result<SweepPoint> {
    let horizon = config.regime.horizon(m);
    let shared = if config.graph.is_random() {
        None
    } else {
        Some(build_network(config, m, derive_seed(&[config.master_seed, tags::TOPOLOGY, m as u64]))?)
    };
    let instances = run_instances(config, m, horizon, shared.as_ref())?;
    let aggregates = config
        .algorithms
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let gaps: Vec<f64> = instances.iter().map(|r| r.traces[k].final_mean_gap()).collect();
            Aggregate { algorithm: spec.kind, mean_final_gap: stats::mean(&gaps), stderr: stats::standard_error(&gaps) }
        })
        .collect();
    let overlay = overlay(config, m, horizon, &instances).map_err(|e| e.context(format!("bounds at m = {m}")))?;
    Ok(SweepPoint { m, horizon, instances, aggregates, overlay })
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let points = config.m_list.iter().map(|&m| run_point(config, m)).collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { config: config.clone(), points })
}
