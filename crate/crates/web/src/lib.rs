//! Browser bindings: consensus decay, a small algorithm comparison and
//! theoretical bound curves, each returning JSON for the page to plot.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use dsamd_core::bounds::{self, BoundInputs, MTerm, ProblemConstants};
use dsamd_core::network::{deviation_from_mean, generate_topology, GraphFamily, MixingMatrix, MixingRule, Topology};
use dsamd_core::rng::{derive_seed, rng_for, tags};
use dsamd_core::{
    make_schedule, run_baseline, AlgorithmKind, BatchRule, FeasibleSet, GroundTruth, LogisticTask, MirrorGeometry, Problem, RunOptions,
};

const MAX_NODES: usize = 128;
const MAX_ROUNDS: usize = 200;
const MAX_HORIZON: usize = 512;
const MAX_INSTANCES: usize = 50;

fn graph(family: &str, m: usize, param: f64, seed: u64) -> Result<(Topology, MixingMatrix), String> {
    if !(2..=MAX_NODES).contains(&m) {
        return Err(format!("node count must be between 2 and {MAX_NODES}"));
    }
    let family = match family {
        "complete" => GraphFamily::Complete,
        "k_regular" => GraphFamily::KRegular { k: param as usize },
        "erdos_renyi" => GraphFamily::ErdosRenyi { p: param },
        other => return Err(format!("unknown graph family {other:?}")),
    };
    let topo = generate_topology(family, m, seed).map_err(|e| e.to_string())?;
    let rule = if topo.is_complete() { MixingRule::MeanForComplete } else { MixingRule::Metropolis };
    let w = MixingMatrix::build(&topo, rule).map_err(|e| e.to_string())?;
    Ok((topo, w))
}

#[derive(Serialize)]
struct Decay {
    lambda2: f64,
    edges: usize,
    deviation: Vec<f64>,
    envelope: Vec<f64>,
}

/// Deviation from the network mean over `rounds` consensus rounds on a
/// random scalar input, with the `lambda2^q` envelope.
pub fn consensus_decay_json(family: &str, m: usize, param: f64, rounds: usize, seed: u64) -> Result<String, String> {
    use rand::Rng;
    let rounds = rounds.min(MAX_ROUNDS);
    let (topo, w) = graph(family, m, param, seed)?;
    let mut rng = rng_for(&[seed, tags::STREAM]);
    let values: Vec<Vec<f64>> = (0..m).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
    let deviation = w.consensus_error_decay(&values, rounds).map_err(|e| e.to_string())?;
    let start = deviation_from_mean(&values);
    let envelope = (0..=rounds).map(|q| w.lambda2().powi(q as i32) * start).collect();
    let out = Decay { lambda2: w.lambda2(), edges: topo.edges().len(), deviation, envelope };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Deserialize)]
struct CompareRequest {
    family: String,
    #[serde(default)]
    param: f64,
    m: usize,
    horizon: usize,
    rho: f64,
    #[serde(default)]
    batch: Option<usize>,
    #[serde(default = "default_instances")]
    instances: usize,
    #[serde(default)]
    seed: u64,
    algorithms: Vec<(AlgorithmKind, f64)>,
}

fn default_instances() -> usize {
    5
}

#[derive(Serialize)]
struct Curve {
    algorithm: AlgorithmKind,
    samples: Vec<usize>,
    mean_gap: Vec<f64>,
}

#[derive(Serialize)]
struct Comparison {
    lambda2: f64,
    batch: usize,
    consensus_rounds: usize,
    curves: Vec<Curve>,
}

/// Instance-averaged gap curves against samples consumed.
pub fn compare_json(request: &str) -> Result<String, String> {
    let req: CompareRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if req.horizon == 0 || req.horizon > MAX_HORIZON {
        return Err(format!("horizon must be between 1 and {MAX_HORIZON}"));
    }
    let instances = req.instances.clamp(1, MAX_INSTANCES);
    let (_, w) = graph(&req.family, req.m, req.param, derive_seed(&[req.seed, tags::TOPOLOGY]))?;
    let rule = match req.batch {
        Some(b) => BatchRule::Explicit { b },
        None => BatchRule::default(),
    };
    let schedule = make_schedule(req.rho, req.horizon, rule, w.lambda2(), req.m).map_err(|e| e.to_string())?;
    let mut curves: Vec<Curve> =
        req.algorithms.iter().map(|(k, _)| Curve { algorithm: *k, samples: Vec::new(), mean_gap: Vec::new() }).collect();
    for i in 0..instances {
        let seed = derive_seed(&[req.seed, tags::INSTANCE, i as u64]);
        let task = LogisticTask::generate(6, 2.0, 0.5, seed).map_err(|e| e.to_string())?;
        let geometry = MirrorGeometry::euclidean(FeasibleSet::centered_ball(task.dimension(), 100.0).map_err(|e| e.to_string())?);
        let mut truth = GroundTruth::exact(&task);
        truth.prepare(geometry.domain()).map_err(|e| e.to_string())?;
        let problem = Problem { task, geometry, truth };
        for ((kind, gamma), curve) in req.algorithms.iter().zip(curves.iter_mut()) {
            let trace = run_baseline(*kind, &problem, Some(&w), &schedule, *gamma, &RunOptions::default()).map_err(|e| e.to_string())?;
            if i == 0 {
                curve.samples = trace.rounds.iter().map(|r| r.samples_consumed).collect();
                curve.mean_gap = vec![0.0; trace.rounds.len()];
            }
            for (acc, r) in curve.mean_gap.iter_mut().zip(&trace.rounds) {
                *acc += r.mean_gap / instances as f64;
            }
        }
    }
    let out = Comparison { lambda2: w.lambda2(), batch: schedule.batch, consensus_rounds: schedule.consensus_rounds, curves };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Deserialize)]
struct BoundRequest {
    constants: ProblemConstants,
    m: usize,
    lambda2: f64,
    r: usize,
    b: usize,
    max_rounds: usize,
    gamma: f64,
}

#[derive(Serialize)]
struct BoundCurves {
    rounds: Vec<usize>,
    dsamd: Vec<f64>,
    adsamd: Vec<f64>,
}

/// Theorem bounds for `S = 1..=max_rounds`.
pub fn bound_curves_json(request: &str) -> Result<String, String> {
    let req: BoundRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let max = req.max_rounds.clamp(1, 10_000);
    let mut out = BoundCurves { rounds: Vec::with_capacity(max), dsamd: Vec::with_capacity(max), adsamd: Vec::with_capacity(max) };
    for s in 1..=max {
        let inputs = BoundInputs { m: req.m, lambda2: req.lambda2, r: req.r, b: req.b, s, gamma: req.gamma };
        let d = bounds::gap_bound_dsamd(&req.constants, &inputs, MTerm::Squared).map_err(|e| e.to_string())?;
        let a = bounds::gap_bound_adsamd(&req.constants, &inputs, MTerm::Squared).map_err(|e| e.to_string())?;
        out.rounds.push(s);
        out.dsamd.push(d.total);
        out.adsamd.push(a.total);
    }
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn consensus_decay(family: &str, m: usize, param: f64, rounds: usize, seed: u32) -> Result<String, JsValue> {
    consensus_decay_json(family, m, param, rounds, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn compare(request: &str) -> Result<String, JsValue> {
    compare_json(request).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn bound_curves(request: &str) -> Result<String, JsValue> {
    bound_curves_json(request).map_err(|e| JsValue::from_str(&e))
}
