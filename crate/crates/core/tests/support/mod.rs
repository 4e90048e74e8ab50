#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds_oracle;

use dsamd_core::{FeasibleSet, GroundTruth, LogisticTask, MirrorGeometry, Problem};

/// Small logistic problem on the radius-100 ball with the exact objective.
pub fn problem(d: usize, seed: u64) -> Problem {
    let task = LogisticTask::generate(d, 2.0, 0.5, seed).unwrap();
    let geometry = MirrorGeometry::euclidean(FeasibleSet::centered_ball(task.dimension(), 100.0).unwrap());
    let mut truth = GroundTruth::exact(&task);
    truth.prepare(geometry.domain()).unwrap();
    Problem { task, geometry, truth }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

use dsamd_core::{MixingMatrix, Topology};

/// Symmetry, double stochasticity, graph consistency, positive diagonal and
/// `lambda2 < 1`.
pub fn check_mixing(topo: &Topology, w: &MixingMatrix) -> Result<(), String> {
    let m = topo.node_count();
    for i in 0..m {
        let row: f64 = (0..m).map(|j| w.weight(i, j)).sum();
        let col: f64 = (0..m).map(|j| w.weight(j, i)).sum();
        if (row - 1.0).abs() > 1e-12 || (col - 1.0).abs() > 1e-12 {
            return Err(format!("row/column {i} sums to {row}/{col}"));
        }
        if w.weight(i, i) <= 0.0 {
            return Err(format!("diagonal {i} is {}", w.weight(i, i)));
        }
        for j in 0..m {
            if w.weight(i, j) != w.weight(j, i) {
                return Err(format!("asymmetric at ({i}, {j})"));
            }
            if i != j && w.weight(i, j) != 0.0 && !topo.neighbors(i).contains(&j) {
                return Err(format!("weight on non-edge ({i}, {j})"));
            }
        }
    }
    if !(w.lambda2() < 1.0) {
        return Err(format!("lambda2 = {}", w.lambda2()));
    }
    Ok(())
}

/// Largest eigenvalue magnitude of `W - 11^T/m` by power iteration on the
/// square, which is positive semidefinite.
pub fn lambda2_power(w: &MixingMatrix, iterations: usize) -> f64 {
    let m = w.node_count();
    let apply = |v: &[f64]| -> Vec<f64> {
        let mean = v.iter().sum::<f64>() / m as f64;
        (0..m).map(|i| (0..m).map(|j| w.weight(i, j) * v[j]).sum::<f64>() - mean).collect()
    };
    let mut v: Vec<f64> = (0..m).map(|i| ((i * 7919 % 101) as f64 / 101.0) - 0.5).collect();
    let mut est = 0.0;
    for _ in 0..iterations {
        let u = apply(&apply(&v));
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let prev = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        est = (norm / prev).sqrt();
        v = u.iter().map(|x| x / norm).collect();
    }
    est
}

/// Largest relative error between the stochastic gradient and central finite
/// differences of the sample loss over `points` random `(x, sample)` pairs.
pub fn finite_difference_error(task: &LogisticTask, points: usize, seed: u64) -> f64 {
    use dsamd_core::oracle::sample_loss;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = task.dimension();
    let h = 1e-5;
    let mut worst = 0.0_f64;
    for k in 0..points {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sample = task.sample_stream(k % 7, k);
        let g = task.stochastic_subgradient(&x, &sample);
        let mut err = 0.0;
        let mut scale = 0.0;
        for i in 0..n {
            let mut up = x.clone();
            let mut down = x.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (sample_loss(&up, &sample) - sample_loss(&down, &sample)) / (2.0 * h);
            err += (fd - g[i]).powi(2);
            scale += g[i] * g[i];
        }
        worst = worst.max((err / scale.max(1e-300)).sqrt());
    }
    worst
}

/// Variance (trace) of the batch-of-`b` mean at `x` over `reps` independent
/// node streams.
pub fn batch_variance(task: &LogisticTask, x: &[f64], b: usize, reps: usize) -> f64 {
    let n = task.dimension();
    let draws: Vec<Vec<f64>> = (0..reps).map(|node| task.mini_batch(node, 1, b, x).unwrap().g).collect();
    let mean: Vec<f64> = (0..n).map(|i| draws.iter().map(|g| g[i]).sum::<f64>() / reps as f64).collect();
    draws.iter().map(|g| g.iter().zip(&mean).map(|(a, m)| (a - m).powi(2)).sum::<f64>()).sum::<f64>() / (reps as f64 - 1.0)
}

use dsamd_core::algorithms::CentralBatching;
use dsamd_core::{run_baseline, AlgorithmKind, RateSchedule, RunOptions, TraceDetail};

pub fn full_options() -> RunOptions {
    RunOptions { detail: TraceDetail::Full, ..RunOptions::default() }
}

fn max_point_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| dsamd_core::vector::max_abs_diff(x, y)).fold(0.0, f64::max)
}

/// Largest per-coordinate difference between a distributed run and its
/// centralized counterpart over all rounds, using search and reported
/// points. The centralized run steps once per pooled `m b` mini-batch.
pub fn deviation_from_central(problem: &Problem, w: &MixingMatrix, schedule: &RateSchedule, distributed: AlgorithmKind, gamma: f64) -> f64 {
    let central = if distributed.is_accelerated() { AlgorithmKind::CentralAmd } else { AlgorithmKind::CentralMd };
    let opts = full_options();
    let dist = run_baseline(distributed, problem, Some(w), schedule, gamma, &opts).unwrap();
    let cen =
        run_baseline(central, problem, None, schedule, gamma, &RunOptions { central_batching: CentralBatching::PerMiniBatch, ..opts })
            .unwrap();
    assert_eq!(dist.rounds.len(), cen.rounds.len());
    let mut worst = 0.0_f64;
    for (d, c) in dist.rounds.iter().zip(&cen.rounds) {
        let c_search = &c.search_points.as_ref().unwrap()[0];
        let c_rep = &c.reported_points.as_ref().unwrap()[0];
        for (s, r) in d.search_points.as_ref().unwrap().iter().zip(d.reported_points.as_ref().unwrap()) {
            worst = worst.max(dsamd_core::vector::max_abs_diff(s, c_search));
            worst = worst.max(dsamd_core::vector::max_abs_diff(r, c_rep));
        }
    }
    worst
}

/// Largest per-coordinate spread of node iterates over all rounds.
pub fn node_spread(problem: &Problem, w: &MixingMatrix, schedule: &RateSchedule, kind: AlgorithmKind, gamma: f64) -> f64 {
    let trace = run_baseline(kind, problem, Some(w), schedule, gamma, &full_options()).unwrap();
    let mut worst = 0.0_f64;
    for rec in &trace.rounds {
        for points in [rec.search_points.as_ref().unwrap(), rec.reported_points.as_ref().unwrap()] {
            let first = vec![points[0].clone(); points.len()];
            worst = worst.max(max_point_gap(points, &first));
        }
    }
    worst
}
