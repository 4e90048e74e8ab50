//! D-SAMD, AD-SAMD, the rate scheduler and the comparison baselines.
//!
//! Every method runs on one engine that differs only in how gradients are
//! sampled (own mini-batch, strided single samples, pooled across nodes), what
//! is averaged over the network (gradients, iterates, nothing) and how
//! iterates are combined (running average or the accelerated three-sequence
//! scheme with `beta_s = (s+1)/2`, `gamma_s = gamma (s+1)/2`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MirrorGeometry, Point};
use crate::network::MixingMatrix;
use crate::oracle::{GroundTruth, LogisticTask};
use crate::trace::{AlgorithmKind, ConvergenceTrace, RoundRecord, RunMeta, TraceDetail};

/// Mini-batch size rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BatchRule {
    Explicit {
        b: usize,
    },
    /// `b = max(ceil(1/rho), ceil(c_mult log(mT) / (rho log(1/lambda2))))`.
    Corollary {
        c_mult: f64,
    },
}

impl Default for BatchRule {
    fn default() -> Self {
        BatchRule::Corollary { c_mult: 0.1 }
    }
}

/// Timing of a run: `T` data rounds grouped into `S` mini-batch rounds of
/// `b` samples, each followed by `r <= floor(b rho)` consensus rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSchedule {
    pub rho: f64,
    pub horizon: usize,
    pub batch: usize,
    pub consensus_rounds: usize,
    pub rounds: usize,
    pub nodes: usize,
    /// The corollary rule asked for more than `T` samples per batch and was
    /// capped at `T`.
    pub capped: bool,
}

/// `floor(b rho)` with slack for products like `0.1 * 10`.
pub fn consensus_budget(b: usize, rho: f64) -> usize {
    (b as f64 * rho + 1e-9).floor() as usize
}

/// Batch size from the corollary sizing rule, floored at `ceil(1/rho)` so
/// that at least one consensus round fits.
pub fn corollary_batch(c_mult: f64, rho: f64, m: usize, horizon: usize, lambda2: f64) -> usize {
    let floor = (1.0 / rho - 1e-9).ceil().max(1.0) as usize;
    if lambda2 <= 0.0 || m <= 1 {
        return floor;
    }
    let raw = c_mult * ((m * horizon) as f64).ln() / (rho * (1.0 / lambda2).ln());
    (raw.ceil().max(1.0) as usize).max(floor)
}

impl RateSchedule {
    pub fn new(rho: f64, horizon: usize, batch: usize, consensus_rounds: usize, nodes: usize) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Schedule(format!("communications ratio must be positive, got {rho}")));
        }
        if horizon == 0 || batch == 0 || nodes == 0 {
            return Err(Error::Schedule("horizon, batch size and node count must be >= 1".into()));
        }
        if batch > horizon {
            return Err(Error::Schedule(format!("batch size {batch} exceeds the horizon T = {horizon}")));
        }
        let budget = consensus_budget(batch, rho);
        if consensus_rounds > budget {
            return Err(Error::Schedule(format!("{consensus_rounds} consensus rounds do not fit in floor(b rho) = {budget}")));
        }
        Ok(RateSchedule { rho, horizon, batch, consensus_rounds, rounds: horizon / batch, nodes, capped: false })
    }

    /// Leftover samples per node that do not fill a mini-batch.
    pub fn leftover(&self) -> usize {
        self.horizon - self.rounds * self.batch
    }
}

/// Builds a schedule using the full consensus budget `r = floor(b rho)`.
pub fn make_schedule(rho: f64, horizon: usize, rule: BatchRule, lambda2: f64, m: usize) -> Result<RateSchedule> {
    if !(rho > 0.0) {
        return Err(Error::Schedule(format!("communications ratio must be positive, got {rho}")));
    }
    if !(0.0..1.0).contains(&lambda2) {
        return Err(Error::Schedule(format!("lambda2 must lie in [0, 1), got {lambda2}")));
    }
    if horizon == 0 {
        return Err(Error::Schedule("horizon must be >= 1".into()));
    }
    let (batch, capped) = match rule {
        BatchRule::Explicit { b } => (b, false),
        BatchRule::Corollary { c_mult } => {
            let b = corollary_batch(c_mult, rho, m, horizon, lambda2);
            if b > horizon {
                (horizon, true)
            } else {
                (b, false)
            }
        }
    };
    let mut schedule = RateSchedule::new(rho, horizon, batch, consensus_budget(batch, rho), m)?;
    schedule.capped = capped;
    Ok(schedule)
}

/// Task, geometry and gap reference shared by all algorithms of an instance.
#[derive(Debug, Clone)]
pub struct Problem {
    pub task: LogisticTask,
    pub geometry: MirrorGeometry,
    pub truth: GroundTruth,
}

/// How the centralized baselines batch the pooled network data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentralBatching {
    /// One step per data round on the `m` fresh samples.
    #[default]
    PerDataRound,
    /// One step per mini-batch round on `m b` samples.
    PerMiniBatch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub detail: TraceDetail,
    /// Record every `eval_every`-th round; the last round is always kept and
    /// `0` keeps only the last.
    pub eval_every: usize,
    /// Gradient Lipschitz estimate used for the `alpha/(2L)` step check.
    pub smoothness: Option<f64>,
    /// Clip the base step to `alpha/(2L)` when `smoothness` is known.
    pub clip_to_smoothness: bool,
    pub central_batching: CentralBatching,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            detail: TraceDetail::MeanOnly,
            eval_every: 1,
            smoothness: None,
            clip_to_smoothness: false,
            central_batching: CentralBatching::PerDataRound,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Sampling {
    /// Own samples `t in ((s-1)b, sb]`.
    MiniBatch { b: usize },
    /// Only sample `t = s * period`; the rest are dropped.
    Strided { period: usize },
    /// A single virtual node averaging the mini-batches of `nodes` streams.
    Pooled { nodes: usize, b: usize },
}

#[derive(Debug, Clone, Copy)]
enum Exchange {
    Nothing,
    Gradients { rounds: usize },
    Iterates,
}

struct EngineSpec<'a> {
    kind: AlgorithmKind,
    nodes: usize,
    network_nodes: usize,
    steps: usize,
    data_rounds_per_step: usize,
    sampling: Sampling,
    exchange: Exchange,
    mixing: Option<&'a MixingMatrix>,
    gamma: f64,
    batch: usize,
    discarded: usize,
}

fn run_engine(problem: &Problem, spec: EngineSpec<'_>, options: &RunOptions) -> Result<ConvergenceTrace> {
    let geometry = &problem.geometry;
    let task = &problem.task;
    if geometry.dimension() != task.dimension() {
        return Err(Error::Config(format!("geometry has dimension {} but the task needs {}", geometry.dimension(), task.dimension())));
    }
    if spec.steps == 0 {
        return Err(Error::Schedule(format!("{} would take no steps", spec.kind)));
    }
    if !(spec.gamma >= 0.0 && spec.gamma.is_finite()) {
        return Err(Error::Parameter(format!("step size must be finite and >= 0, got {}", spec.gamma)));
    }
    let step_limit = options.smoothness.map(|l| geometry.alpha() / (2.0 * l));
    let gamma = match step_limit {
        Some(limit) if options.clip_to_smoothness => spec.gamma.min(limit),
        _ => spec.gamma,
    };
    let accelerated = spec.kind.is_accelerated();
    let n = task.dimension();
    let m = spec.nodes;
    let start = geometry.initial_point()?;
    let mut search: Vec<Point> = vec![start.clone(); m];
    let mut aggregate: Vec<Point> = vec![start.clone(); m];
    let mut running_sum: Vec<Point> = vec![vec![0.0; n]; m];
    let mut reported: Vec<Point> = vec![start; m];
    let mut query: Vec<Point> = vec![vec![0.0; n]; m];
    let mut grads: Vec<Point> = vec![vec![0.0; n]; m];
    let mut scratch: Vec<Point> = vec![vec![0.0; n]; m];
    let mut pooled_part = vec![0.0; n];
    let mut records = Vec::new();
    let mut consensus_total = 0;
    let every = options.eval_every;
    let mut final_node_gaps = Vec::new();

    for s in 1..=spec.steps {
        let (inv_beta, step) = if accelerated {
            let beta = (s as f64 + 1.0) / 2.0;
            (1.0 / beta, gamma * beta)
        } else {
            (1.0, gamma)
        };
        for i in 0..m {
            if accelerated {
                for ((q, x), ag) in query[i].iter_mut().zip(&search[i]).zip(&aggregate[i]) {
                    *q = inv_beta * x + (1.0 - inv_beta) * ag;
                }
            } else {
                query[i].copy_from_slice(&search[i]);
            }
        }
        for i in 0..m {
            match spec.sampling {
                Sampling::MiniBatch { b } => task.batch_mean_into(i, (s - 1) * b + 1..=s * b, &query[i], &mut grads[i]),
                Sampling::Strided { period } => task.batch_mean_into(i, std::iter::once(s * period), &query[i], &mut grads[i]),
                Sampling::Pooled { nodes, b } => {
                    grads[i].iter_mut().for_each(|v| *v = 0.0);
                    for j in 0..nodes {
                        task.batch_mean_into(j, (s - 1) * b + 1..=s * b, &query[i], &mut pooled_part);
                        for (g, p) in grads[i].iter_mut().zip(&pooled_part) {
                            *g += p;
                        }
                    }
                    let inv = 1.0 / nodes as f64;
                    grads[i].iter_mut().for_each(|v| *v *= inv);
                }
            }
        }
        if let (Exchange::Gradients { rounds }, Some(w)) = (spec.exchange, spec.mixing) {
            w.mix_rounds(&mut grads, &mut scratch, rounds);
            consensus_total += rounds;
        }
        for i in 0..m {
            let scaled: Vec<f64> = grads[i].iter().map(|g| step * g).collect();
            search[i] =
                geometry.prox_map(&search[i], &scaled).map_err(|e| e.context(format!("{} prox step at round {s}, node {i}", spec.kind)))?;
        }
        if let (Exchange::Iterates, Some(w)) = (spec.exchange, spec.mixing) {
            w.mix_rounds(&mut search, &mut scratch, 1);
            consensus_total += 1;
        }
        for i in 0..m {
            if accelerated {
                for (ag, x) in aggregate[i].iter_mut().zip(&search[i]) {
                    *ag = inv_beta * x + (1.0 - inv_beta) * *ag;
                }
                reported[i].copy_from_slice(&aggregate[i]);
            } else {
                let inv_s = 1.0 / s as f64;
                for ((acc, x), r) in running_sum[i].iter_mut().zip(&search[i]).zip(reported[i].iter_mut()) {
                    *acc += x;
                    *r = *acc * inv_s;
                }
            }
        }
        let record = s == spec.steps || (every > 0 && s % every == 0);
        if record {
            let gaps = node_gaps(&problem.truth, &reported)?;
            let mean_gap = gaps.iter().sum::<f64>() / m as f64;
            let keep_nodes = !matches!(options.detail, TraceDetail::MeanOnly);
            let keep_points = matches!(options.detail, TraceDetail::Full);
            records.push(RoundRecord {
                round: s,
                samples_consumed: spec.network_nodes * s * spec.data_rounds_per_step,
                mean_gap,
                node_gaps: keep_nodes.then(|| gaps.clone()),
                search_points: keep_points.then(|| search.clone()),
                reported_points: keep_points.then(|| reported.clone()),
            });
            if s == spec.steps {
                final_node_gaps = gaps;
            }
        }
    }
    let per_step = match spec.exchange {
        Exchange::Nothing => 0,
        Exchange::Gradients { rounds } => rounds,
        Exchange::Iterates => 1,
    };
    Ok(ConvergenceTrace {
        algorithm: spec.kind,
        nodes: m,
        rounds: records,
        final_node_gaps,
        final_points: reported,
        meta: RunMeta {
            step_size: gamma,
            prox_steps: spec.steps,
            consensus_rounds_per_step: per_step,
            consensus_rounds_total: consensus_total,
            batch_size: spec.batch,
            discarded_samples: spec.discarded,
            step_limit,
            step_exceeds_limit: step_limit.is_some_and(|l| gamma > l),
        },
    })
}

/// Gaps per node, reusing the previous node's value when the points agree
/// exactly (common under exact averaging).
fn node_gaps(truth: &GroundTruth, points: &[Point]) -> Result<Vec<f64>> {
    let mut gaps: Vec<f64> = Vec::with_capacity(points.len());
    for (i, x) in points.iter().enumerate() {
        let gap = match i.checked_sub(1) {
            Some(j) if points[j] == *x => gaps[j],
            _ => truth.evaluate_gap(x)?,
        };
        gaps.push(gap);
    }
    Ok(gaps)
}

fn check_mixing(w: &MixingMatrix, schedule: &RateSchedule) -> Result<()> {
    if w.node_count() != schedule.nodes {
        return Err(Error::Config(format!("mixing matrix has {} nodes but the schedule was built for {}", w.node_count(), schedule.nodes)));
    }
    if schedule.consensus_rounds > consensus_budget(schedule.batch, schedule.rho) {
        return Err(Error::Config("schedule exceeds its consensus budget".into()));
    }
    Ok(())
}

fn distributed(
    kind: AlgorithmKind,
    problem: &Problem,
    w: &MixingMatrix,
    schedule: &RateSchedule,
    gamma: f64,
    options: &RunOptions,
) -> Result<ConvergenceTrace> {
    check_mixing(w, schedule)?;
    let spec = EngineSpec {
        kind,
        nodes: schedule.nodes,
        network_nodes: schedule.nodes,
        steps: schedule.rounds,
        data_rounds_per_step: schedule.batch,
        sampling: Sampling::MiniBatch { b: schedule.batch },
        exchange: Exchange::Gradients { rounds: schedule.consensus_rounds },
        mixing: Some(w),
        gamma,
        batch: schedule.batch,
        discarded: schedule.leftover(),
    };
    run_engine(problem, spec, options)
}

/// Distributed stochastic approximation mirror descent: mini-batch, `r`
/// consensus rounds on the gradients, prox step, running average.
pub fn run_dsamd(
    problem: &Problem,
    w: &MixingMatrix,
    schedule: &RateSchedule,
    gamma: f64,
    options: &RunOptions,
) -> Result<ConvergenceTrace> {
    distributed(AlgorithmKind::Dsamd, problem, w, schedule, gamma, options)
}

/// Accelerated variant: gradients are taken at `x^md`, the reported point is
/// `x^ag`.
pub fn run_adsamd(
    problem: &Problem,
    w: &MixingMatrix,
    schedule: &RateSchedule,
    gamma: f64,
    options: &RunOptions,
) -> Result<ConvergenceTrace> {
    distributed(AlgorithmKind::Adsamd, problem, w, schedule, gamma, options)
}

/// Per-step period `ceil(1/rho)` used by the DGD adaptations.
pub fn dgd_period(rho: f64) -> usize {
    (1.0 / rho - 1e-9).ceil().max(1.0) as usize
}

pub fn run_baseline(
    kind: AlgorithmKind,
    problem: &Problem,
    w: Option<&MixingMatrix>,
    schedule: &RateSchedule,
    gamma: f64,
    options: &RunOptions,
) -> Result<ConvergenceTrace> {
    let m = schedule.nodes;
    let t = schedule.horizon;
    let spec = match kind {
        AlgorithmKind::Dsamd | AlgorithmKind::Adsamd => {
            let w = w.ok_or_else(|| Error::Config(format!("{kind} needs a mixing matrix")))?;
            return distributed(kind, problem, w, schedule, gamma, options);
        }
        AlgorithmKind::CentralMd | AlgorithmKind::CentralAmd => {
            let (b, steps) = match options.central_batching {
                CentralBatching::PerDataRound => (1, t),
                CentralBatching::PerMiniBatch => (schedule.batch, schedule.rounds),
            };
            EngineSpec {
                kind,
                nodes: 1,
                network_nodes: m,
                steps,
                data_rounds_per_step: b,
                sampling: Sampling::Pooled { nodes: m, b },
                exchange: Exchange::Nothing,
                mixing: None,
                gamma,
                batch: m * b,
                discarded: t - steps * b,
            }
        }
        AlgorithmKind::LocalMd | AlgorithmKind::LocalAmd => EngineSpec {
            kind,
            nodes: m,
            network_nodes: m,
            steps: t,
            data_rounds_per_step: 1,
            sampling: Sampling::MiniBatch { b: 1 },
            exchange: Exchange::Nothing,
            mixing: None,
            gamma,
            batch: 1,
            discarded: 0,
        },
        AlgorithmKind::DgdNaive | AlgorithmKind::DgdMinibatch => {
            let w = w.ok_or_else(|| Error::Config(format!("{kind} needs a mixing matrix")))?;
            check_mixing(w, schedule)?;
            let period = dgd_period(schedule.rho);
            let steps = t / period;
            let (sampling, batch, discarded) = if kind == AlgorithmKind::DgdNaive {
                (Sampling::Strided { period }, 1, t - steps)
            } else {
                (Sampling::MiniBatch { b: period }, period, t - steps * period)
            };
            EngineSpec {
                kind,
                nodes: m,
                network_nodes: m,
                steps,
                data_rounds_per_step: period,
                sampling,
                exchange: Exchange::Iterates,
                mixing: Some(w),
                gamma,
                batch,
                discarded,
            }
        }
    };
    run_engine(problem, spec, options)
}
