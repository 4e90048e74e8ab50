//! Gaussian-class logistic regression: sample streams, the stochastic
//! first-order oracle, mini-batching and ground-truth gap evaluation.
//!
//! Points live in `R^{d+1}`: the first `d` entries are the coefficients and
//! the last one is the intercept.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FeasibleSet;
use crate::quadrature::{expected_softplus, logistic_moments, sigmoid, softplus};
use crate::rng::{self, tags};
use crate::vector::{dot, norm2};

pub const DEFAULT_DIMENSION: usize = 20;
pub const DEFAULT_SIGMA_R2: f64 = 2.0;
pub const DEFAULT_LABEL_PRIOR: f64 = 0.5;
pub const DEFAULT_EVAL_SAMPLES: usize = 100_000;

/// Gradient-norm tolerance for the ground-truth minimization.
pub const TRUTH_TOLERANCE: f64 = 1e-10;

/// Binary classification task with `y | l ~ N(mu_l, sigma_r2 I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticTask {
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    pub sigma_r2: f64,
    pub label_prior: f64,
    /// Keys every training sample of the task.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSample {
    pub features: Vec<f64>,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientEstimate {
    pub g: Vec<f64>,
    pub eval_point: Vec<f64>,
    pub batch_size: usize,
}

impl LogisticTask {
    /// Draws class means with standard-normal entries from `seed`.
    pub fn generate(d: usize, sigma_r2: f64, label_prior: f64, seed: u64) -> Result<Self> {
        let mut rng = rng::rng_for(&[seed, tags::CLASS_MEANS]);
        let mu0 = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let mu1 = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        Self::with_means(mu0, mu1, sigma_r2, label_prior, seed)
    }

    pub fn with_means(mu0: Vec<f64>, mu1: Vec<f64>, sigma_r2: f64, label_prior: f64, seed: u64) -> Result<Self> {
        if mu0.len() != mu1.len() || mu0.is_empty() {
            return Err(Error::Parameter("class means must have equal non-zero length".into()));
        }
        if !(sigma_r2 >= 0.0 && sigma_r2.is_finite()) {
            return Err(Error::Parameter(format!("class variance must be finite and >= 0, got {sigma_r2}")));
        }
        if !(label_prior > 0.0 && label_prior < 1.0) {
            return Err(Error::Parameter(format!("label prior must lie in (0, 1), got {label_prior}")));
        }
        Ok(LogisticTask { mu0, mu1, sigma_r2, label_prior, seed })
    }

    pub fn feature_dimension(&self) -> usize {
        self.mu0.len()
    }

    /// Dimension of the search space (`d + 1`).
    pub fn dimension(&self) -> usize {
        self.mu0.len() + 1
    }

    /// Class-conditional feature mean.
    pub fn mean(&self, label: u8) -> &[f64] {
        if label == 1 {
            &self.mu1
        } else {
            &self.mu0
        }
    }

    /// Writes the features of sample `(node, t)` into `features` and returns
    /// its label. Deterministic in `(seed, node, t)`.
    pub fn fill_sample(&self, node: usize, t: usize, features: &mut [f64]) -> u8 {
        let mut rng = rng::rng_for(&[self.seed, tags::SAMPLE, node as u64, t as u64]);
        draw_into(self, &mut rng, features)
    }

    pub fn sample_stream(&self, node: usize, t: usize) -> OracleSample {
        let mut features = vec![0.0; self.feature_dimension()];
        let label = self.fill_sample(node, t, &mut features);
        OracleSample { features, label }
    }

    /// Gradient of the negative log-likelihood at `x_aug`:
    /// `(sigmoid(y^T x + x0) - l) (y, 1)`.
    pub fn stochastic_subgradient(&self, x_aug: &[f64], sample: &OracleSample) -> Vec<f64> {
        let mut g = vec![0.0; self.dimension()];
        accumulate_gradient(x_aug, &sample.features, sample.label, 1.0, &mut g);
        g
    }

    /// Mini-batch average over samples `t in ((s-1)b, sb]` of `node`'s
    /// stream, all evaluated at the same point.
    pub fn mini_batch(&self, node: usize, s: usize, b: usize, x_aug: &[f64]) -> Result<SubgradientEstimate> {
        if b == 0 || s == 0 {
            return Err(Error::Parameter("mini-batch needs b >= 1 and s >= 1".into()));
        }
        let mut g = vec![0.0; self.dimension()];
        self.batch_mean_into(node, (s - 1) * b + 1..=s * b, x_aug, &mut g);
        Ok(SubgradientEstimate { g, eval_point: x_aug.to_vec(), batch_size: b })
    }

    /// Averages stochastic gradients over the listed sample times of `node`.
    pub fn batch_mean_into(&self, node: usize, times: impl IntoIterator<Item = usize>, x_aug: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut features = vec![0.0; self.feature_dimension()];
        let mut count = 0usize;
        for t in times {
            let label = self.fill_sample(node, t, &mut features);
            accumulate_gradient(x_aug, &features, label, 1.0, out);
            count += 1;
        }
        if count > 0 {
            let inv = 1.0 / count as f64;
            out.iter_mut().for_each(|v| *v *= inv);
        }
    }

    /// Population loss `psi(x) = -E[F(x, x0, y, l)]`, exact up to quadrature.
    pub fn population_loss(&self, x_aug: &[f64]) -> f64 {
        let (x, x0) = x_aug.split_at(self.feature_dimension());
        let sd = self.sigma_r2.sqrt() * norm2(x);
        let p = self.label_prior;
        let m1 = dot(&self.mu1, x) + x0[0];
        let m0 = dot(&self.mu0, x) + x0[0];
        p * (expected_softplus(m1, sd) - m1) + (1.0 - p) * expected_softplus(m0, sd)
    }

    /// Population gradient and Hessian.
    pub fn population_derivatives(&self, x_aug: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let d = self.feature_dimension();
        let n = d + 1;
        let (x, x0) = x_aug.split_at(d);
        let s2 = self.sigma_r2;
        let v = s2 * dot(x, x);
        let mut grad = vec![0.0; n];
        let mut hess = DMatrix::<f64>::zeros(n, n);
        // d v / d w
        let mut dv = vec![0.0; n];
        for i in 0..d {
            dv[i] = 2.0 * s2 * x[i];
        }
        for (label, weight) in [(1u8, self.label_prior), (0u8, 1.0 - self.label_prior)] {
            let mu = self.mean(label);
            let mut a = mu.to_vec();
            a.push(1.0);
            let m = dot(mu, x) + x0[0];
            let mom = logistic_moments(m, v.sqrt());
            let phi_m = mom.sigmoid - label as f64;
            let phi_v = 0.5 * mom.d1;
            let phi_mm = mom.d1;
            let phi_mv = 0.5 * mom.d2;
            let phi_vv = 0.25 * mom.d3;
            for i in 0..n {
                grad[i] += weight * (phi_m * a[i] + phi_v * dv[i]);
                for j in 0..n {
                    hess[(i, j)] += weight * (phi_mm * a[i] * a[j] + phi_mv * (a[i] * dv[j] + dv[i] * a[j]) + phi_vv * dv[i] * dv[j]);
                }
            }
            for i in 0..d {
                hess[(i, i)] += weight * phi_v * 2.0 * s2;
            }
        }
        (grad, hess)
    }

    /// Closed-form population minimizer: the model is well specified, so the
    /// log-odds are exactly linear in `y`.
    pub fn bayes_coefficients(&self) -> Option<Vec<f64>> {
        if self.sigma_r2 == 0.0 {
            return None;
        }
        let mut w: Vec<f64> = self.mu1.iter().zip(&self.mu0).map(|(a, b)| (a - b) / self.sigma_r2).collect();
        let p = self.label_prior;
        w.push((dot(&self.mu0, &self.mu0) - dot(&self.mu1, &self.mu1)) / (2.0 * self.sigma_r2) + (p / (1.0 - p)).ln());
        Some(w)
    }

    /// `E |(y, 1)|^2`
    pub fn second_moment(&self) -> f64 {
        let p = self.label_prior;
        1.0 + p * dot(&self.mu1, &self.mu1) + (1.0 - p) * dot(&self.mu0, &self.mu0) + self.feature_dimension() as f64 * self.sigma_r2
    }

    /// Gradient Lipschitz estimate `0.25 E |(y, 1)|^2` of the logistic loss.
    pub fn smoothness_estimate(&self) -> f64 {
        0.25 * self.second_moment()
    }

    /// `E |G(0, xi) - grad psi(0)|^2` in closed form.
    pub fn noise_variance_at_origin(&self) -> f64 {
        let p = self.label_prior;
        // G(0) = (1/2 - l)(y, 1), so E|G|^2 = E|(y,1)|^2 / 4.
        let mean: Vec<f64> = (0..self.dimension())
            .map(|i| {
                let (a1, a0) = if i < self.feature_dimension() { (self.mu1[i], self.mu0[i]) } else { (1.0, 1.0) };
                -0.5 * p * a1 + 0.5 * (1.0 - p) * a0
            })
            .collect();
        0.25 * self.second_moment() - dot(&mean, &mean)
    }

    /// Monte Carlo estimate of `E |G(x, xi) - E G(x, xi)|^2` from a dedicated
    /// stream keyed by `seed`.
    pub fn estimate_noise_variance(&self, x_aug: &[f64], samples: usize, seed: u64) -> f64 {
        let n = self.dimension();
        let mut rng = rng::rng_for(&[self.seed, tags::NOISE_PROBE, seed]);
        let mut features = vec![0.0; self.feature_dimension()];
        let mut sum = vec![0.0; n];
        let mut sum_sq = 0.0;
        let mut g = vec![0.0; n];
        for _ in 0..samples {
            let label = draw_into(self, &mut rng, &mut features);
            g.iter_mut().for_each(|v| *v = 0.0);
            accumulate_gradient(x_aug, &features, label, 1.0, &mut g);
            for (s, v) in sum.iter_mut().zip(&g) {
                *s += v;
            }
            sum_sq += dot(&g, &g);
        }
        let k = samples as f64;
        let mean_sq = dot(&sum, &sum) / (k * k);
        (sum_sq / k - mean_sq) * k / (k - 1.0).max(1.0)
    }
}

fn draw_into<R: Rng>(task: &LogisticTask, rng: &mut R, features: &mut [f64]) -> u8 {
    let label = u8::from(rng.random::<f64>() < task.label_prior);
    let sd = task.sigma_r2.sqrt();
    for (f, mu) in features.iter_mut().zip(task.mean(label)) {
        let eps: f64 = rng.sample(StandardNormal);
        *f = mu + sd * eps;
    }
    label
}

/// `out += weight * (sigmoid(y^T x + x0) - l) (y, 1)`
fn accumulate_gradient(x_aug: &[f64], features: &[f64], label: u8, weight: f64, out: &mut [f64]) {
    let d = features.len();
    let margin = dot(&x_aug[..d], features) + x_aug[d];
    let coef = weight * (sigmoid(margin) - label as f64);
    for (o, y) in out[..d].iter_mut().zip(features) {
        *o += coef * y;
    }
    out[d] += coef;
}

/// Negative log-likelihood of one sample.
pub fn sample_loss(x_aug: &[f64], sample: &OracleSample) -> f64 {
    let d = sample.features.len();
    let margin = dot(&x_aug[..d], &sample.features) + x_aug[d];
    softplus(margin) - sample.label as f64 * margin
}

/// Which surrogate of `psi` the gap is measured against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// Population loss through Gaussian quadrature.
    #[default]
    Exact,
    /// Empirical loss on a fixed-seed holdout set.
    Holdout { samples: usize },
}

#[derive(Debug, Clone)]
enum Surrogate {
    Exact,
    Holdout(Vec<OracleSample>),
}

/// Reference objective, minimizer and optimal value for gap evaluation.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    task: LogisticTask,
    surrogate: Surrogate,
    holdout_seed: u64,
    x_star: Option<Vec<f64>>,
    psi_star: Option<f64>,
}

impl GroundTruth {
    pub fn exact(task: &LogisticTask) -> Self {
        GroundTruth { task: task.clone(), surrogate: Surrogate::Exact, holdout_seed: 0, x_star: None, psi_star: None }
    }

    /// Draws `samples` holdout points from a stream independent of training.
    pub fn holdout(task: &LogisticTask, samples: usize, seed: u64) -> Self {
        let mut rng = rng::rng_for(&[task.seed, tags::HOLDOUT, seed]);
        let d = task.feature_dimension();
        let holdout = (0..samples)
            .map(|_| {
                let mut features = vec![0.0; d];
                let label = draw_into(task, &mut rng, &mut features);
                OracleSample { features, label }
            })
            .collect();
        GroundTruth { task: task.clone(), surrogate: Surrogate::Holdout(holdout), holdout_seed: seed, x_star: None, psi_star: None }
    }

    pub fn build(task: &LogisticTask, kind: ObjectiveKind, seed: u64) -> Self {
        match kind {
            ObjectiveKind::Exact => Self::exact(task),
            ObjectiveKind::Holdout { samples } => Self::holdout(task, samples, seed),
        }
    }

    pub fn task(&self) -> &LogisticTask {
        &self.task
    }

    pub fn holdout_samples(&self) -> Option<&[OracleSample]> {
        match &self.surrogate {
            Surrogate::Holdout(h) => Some(h),
            Surrogate::Exact => None,
        }
    }

    pub fn x_star(&self) -> Option<&[f64]> {
        self.x_star.as_deref()
    }

    pub fn psi_star(&self) -> Option<f64> {
        self.psi_star
    }

    pub fn objective(&self, x_aug: &[f64]) -> f64 {
        match &self.surrogate {
            Surrogate::Exact => self.task.population_loss(x_aug),
            Surrogate::Holdout(h) => h.iter().map(|s| sample_loss(x_aug, s)).sum::<f64>() / h.len() as f64,
        }
    }

    pub fn gradient(&self, x_aug: &[f64]) -> Vec<f64> {
        match &self.surrogate {
            Surrogate::Exact => self.task.population_derivatives(x_aug).0,
            Surrogate::Holdout(h) => {
                let mut g = vec![0.0; self.task.dimension()];
                let w = 1.0 / h.len() as f64;
                for s in h {
                    accumulate_gradient(x_aug, &s.features, s.label, w, &mut g);
                }
                g
            }
        }
    }

    fn derivatives(&self, x_aug: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        match &self.surrogate {
            Surrogate::Exact => self.task.population_derivatives(x_aug),
            Surrogate::Holdout(h) => {
                let n = self.task.dimension();
                let d = n - 1;
                let mut g = vec![0.0; n];
                let mut hess = DMatrix::<f64>::zeros(n, n);
                let w = 1.0 / h.len() as f64;
                let mut a = vec![1.0; n];
                for s in h {
                    a[..d].copy_from_slice(&s.features);
                    let sig = sigmoid(dot(&x_aug[..d], &s.features) + x_aug[d]);
                    let coef = w * (sig - s.label as f64);
                    let curv = w * sig * (1.0 - sig);
                    for i in 0..n {
                        g[i] += coef * a[i];
                        let ci = curv * a[i];
                        for j in i..n {
                            hess[(i, j)] += ci * a[j];
                        }
                    }
                }
                for i in 0..n {
                    for j in 0..i {
                        hess[(i, j)] = hess[(j, i)];
                    }
                }
                (g, hess)
            }
        }
    }

    /// Minimizes the surrogate over `domain` (damped Newton; projected
    /// gradient if the unconstrained minimizer is infeasible).
    pub fn prepare(&mut self, domain: &FeasibleSet) -> Result<()> {
        let n = self.task.dimension();
        if domain.dimension() != n {
            return Err(Error::Shape { expected: format!("{n}-dimensional domain"), actual: format!("{}", domain.dimension()) });
        }
        let start = match (&self.surrogate, self.task.bayes_coefficients()) {
            (Surrogate::Exact, Some(w)) => w,
            _ => vec![0.0; n],
        };
        let mut x = self.newton(start)?;
        if !domain.contains(&x) {
            x = self.projected_descent(domain, domain.project(&x))?;
        }
        self.psi_star = Some(self.objective(&x));
        self.x_star = Some(x);
        Ok(())
    }

    fn newton(&self, mut x: Vec<f64>) -> Result<Vec<f64>> {
        let mut f = self.objective(&x);
        for _ in 0..200 {
            let (g, h) = self.derivatives(&x);
            let gnorm = norm2(&g);
            if gnorm <= TRUTH_TOLERANCE {
                return Ok(x);
            }
            let rhs = DVector::from_vec(g.iter().map(|v| -v).collect());
            let dir = match h.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => rhs.clone(),
            };
            let slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
            let dir: Vec<f64> = if slope < 0.0 { dir.iter().copied().collect() } else { rhs.iter().copied().collect() };
            let slope: f64 = dot(&dir, &g);
            let mut t = 1.0;
            loop {
                let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
                let ft = self.objective(&trial);
                if ft <= f + 1e-4 * t * slope || t < 1e-12 {
                    // Near the optimum the decrease is below rounding; accept
                    // the full step and let the gradient test decide.
                    x = trial;
                    f = ft.min(f);
                    break;
                }
                t *= 0.5;
            }
        }
        let residual = norm2(&self.gradient(&x));
        if residual <= 1e3 * TRUTH_TOLERANCE {
            return Ok(x);
        }
        Err(Error::Convergence { iterations: 200, residual })
    }

    /// Global bound on the surrogate Hessian: `0.25 E |(y, 1)|^2`.
    fn smoothness_bound(&self) -> f64 {
        match &self.surrogate {
            Surrogate::Exact => self.task.smoothness_estimate(),
            Surrogate::Holdout(samples) => {
                let total: f64 = samples.iter().map(|s| 1.0 + dot(&s.features, &s.features)).sum();
                0.25 * total / samples.len().max(1) as f64
            }
        }
    }

    /// Accelerated projected gradient with step `1/L` and gradient-based
    /// restarts. No objective comparisons, which stall in rounding noise.
    fn projected_descent(&self, domain: &FeasibleSet, start: Vec<f64>) -> Result<Vec<f64>> {
        let step = 1.0 / self.smoothness_bound();
        let mut x = start.clone();
        let mut y = start;
        let mut momentum = 1.0_f64;
        let mut residual = f64::INFINITY;
        const LIMIT: usize = 200_000;
        for _ in 0..LIMIT {
            let g = self.gradient(&y);
            let next = domain.project(&y.iter().zip(&g).map(|(a, b)| a - step * b).collect::<Vec<_>>());
            residual = crate::vector::dist2(&next, &y) / step;
            if residual <= TRUTH_TOLERANCE {
                return Ok(next);
            }
            let delta: Vec<f64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
            let restart = dot(&g, &delta) > 0.0;
            let upcoming = if restart { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) };
            let coef = if restart { 0.0 } else { (momentum - 1.0) / upcoming };
            y = next.iter().zip(&delta).map(|(a, d)| a + coef * d).collect();
            x = next;
            momentum = upcoming;
        }
        Err(Error::Convergence { iterations: LIMIT, residual })
    }

    /// Surrogate value at `x` minus the optimum value.
    pub fn evaluate_gap(&self, x: &[f64]) -> Result<f64> {
        let psi_star = self.psi_star.ok_or_else(|| Error::State("ground truth has not been prepared".into()))?;
        let gap = self.objective(x) - psi_star;
        Ok(if gap < 0.0 && gap > -1e-9 { 0.0 } else { gap })
    }

    /// Cache file name for a holdout set.
    pub fn holdout_file_name(task: &LogisticTask, samples: usize, seed: u64) -> String {
        format!("holdout_{:016x}_{:016x}_d{}_s{:016x}_n{}.bin", task.seed, seed, task.feature_dimension(), task.sigma_r2.to_bits(), samples)
    }

    /// Writes the holdout set as `DSHO` little-endian records.
    pub fn save_holdout(&self, dir: &Path) -> Result<PathBuf> {
        let holdout = self.holdout_samples().ok_or_else(|| Error::State("exact ground truth has no holdout".into()))?;
        let path = dir.join(Self::holdout_file_name(&self.task, holdout.len(), self.holdout_seed));
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        let mut buf = Vec::with_capacity(64 + holdout.len() * (1 + 8 * self.task.feature_dimension()));
        buf.extend_from_slice(b"DSHO");
        buf.extend_from_slice(&1u32.to_le_bytes());
        buf.extend_from_slice(&self.task.seed.to_le_bytes());
        buf.extend_from_slice(&self.holdout_seed.to_le_bytes());
        buf.extend_from_slice(&(self.task.feature_dimension() as u32).to_le_bytes());
        buf.extend_from_slice(&self.task.sigma_r2.to_le_bytes());
        buf.extend_from_slice(&(holdout.len() as u64).to_le_bytes());
        for s in holdout {
            buf.push(s.label);
            for f in &s.features {
                buf.extend_from_slice(&f.to_le_bytes());
            }
        }
        w.write_all(&buf).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Loads a cached holdout set, checking that its key matches `task`.
    pub fn load_holdout(task: &LogisticTask, samples: usize, seed: u64, dir: &Path) -> Result<Self> {
        let path = dir.join(Self::holdout_file_name(task, samples, seed));
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut bytes = Vec::new();
        BufReader::new(file).read_to_end(&mut bytes).map_err(|e| Error::io(&path, e))?;
        let d = task.feature_dimension();
        let header = 4 + 4 + 8 + 8 + 4 + 8 + 8;
        let bad = |why: &str| Error::Data(format!("{}: {why}", path.display()));
        if bytes.len() < header || &bytes[..4] != b"DSHO" {
            return Err(bad("not a holdout file"));
        }
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        if u32_at(4) != 1 {
            return Err(bad("unsupported version"));
        }
        if u64_at(8) != task.seed
            || u64_at(16) != seed
            || u32_at(24) as usize != d
            || u64_at(28) != task.sigma_r2.to_bits()
            || u64_at(36) as usize != samples
        {
            return Err(bad("key does not match the task"));
        }
        let record = 1 + 8 * d;
        if bytes.len() != header + samples * record {
            return Err(bad("truncated"));
        }
        let holdout = bytes[header..]
            .chunks_exact(record)
            .map(|chunk| OracleSample {
                label: chunk[0],
                features: chunk[1..].chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect(),
            })
            .collect();
        Ok(GroundTruth { task: task.clone(), surrogate: Surrogate::Holdout(holdout), holdout_seed: seed, x_star: None, psi_star: None })
    }
}
