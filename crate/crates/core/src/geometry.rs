//! Mirror-descent geometry: distance-generating functions, Bregman
//! divergences, prox mappings and the norm constants consumed by the bounds.
//!
//! Two geometries ship: the Euclidean one (`omega = 0.5 * |x|_2^2`, prox map
//! equal to a Euclidean projection) and the l_p one (`omega = 0.5 * |x|_p^2`
//! for `1 < p <= 2`, modulus `p - 1` with respect to `|.|_p`) whose prox map
//! needs an inner solver once the constraint becomes active.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;
use crate::vector::{dist2, dot, norm2, sub};

pub type Point = Vec<f64>;

/// Iteration cap of the bisections inside prox maps without a closed form.
pub const PROX_MAX_ITERATIONS: usize = 10_000;

/// Relative slack used by membership checks.
const DOMAIN_SLACK: f64 = 1e-9;

fn lp_norm(x: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return x.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    if p == 1.0 {
        return x.iter().map(|v| v.abs()).sum();
    }
    let peak = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return 0.0;
    }
    peak * x.iter().map(|v| (v.abs() / peak).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Primal/dual norm pair together with the variance-averaging constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormPair {
    Euclidean,
    /// `|.|_p` with dual `|.|_q`, `1/p + 1/q = 1`.
    Lp {
        p: f64,
    },
    /// `|.|_1` with dual `|.|_inf`.
    L1Linf,
}

impl NormPair {
    pub fn primal_norm(&self, x: &[f64]) -> f64 {
        match *self {
            NormPair::Euclidean => norm2(x),
            NormPair::Lp { p } => lp_norm(x, p),
            NormPair::L1Linf => lp_norm(x, 1.0),
        }
    }

    pub fn dual_norm(&self, g: &[f64]) -> f64 {
        match *self {
            NormPair::Euclidean => norm2(g),
            NormPair::Lp { p } => lp_norm(g, conjugate_exponent(p)),
            NormPair::L1Linf => lp_norm(g, f64::INFINITY),
        }
    }

    pub fn inner_product(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(a, b)
    }

    /// Smallest `C` with `E|mean of k iid zero-mean z|_*^2 <= C sigma^2 / k`
    /// obtained from norm equivalence with the Euclidean norm.
    pub fn c_star(&self, n: usize) -> f64 {
        match *self {
            NormPair::Euclidean => 1.0,
            // |z|_2^2 <= n^{1-2/q} |z|_q^2 and |z|_q <= |z|_2 for q >= 2.
            NormPair::Lp { p } => (n as f64).powf(2.0 / p - 1.0).max(1.0),
            NormPair::L1Linf => n as f64,
        }
    }
}

pub fn conjugate_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

/// Convex feasible set `X`.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    EuclideanBall {
        center: Point,
        radius: f64,
    },
    Box {
        lower: Point,
        upper: Point,
    },
    /// Permitted for parity with unconstrained experiments. Theory-side
    /// quantities (`d_omega`, bounds) are unavailable on it.
    Unbounded {
        dimension: usize,
    },
}

impl FeasibleSet {
    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Parameter(format!("ball radius must be positive, got {radius}")));
        }
        if center.is_empty() || !center.iter().all(|c| c.is_finite()) {
            return Err(Error::Parameter("ball center must be a non-empty finite vector".into()));
        }
        Ok(FeasibleSet::EuclideanBall { center, radius })
    }

    pub fn centered_ball(dimension: usize, radius: f64) -> Result<Self> {
        Self::ball(vec![0.0; dimension], radius)
    }

    pub fn boxed(lower: Point, upper: Point) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Parameter("box bounds must have equal, non-zero length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::Parameter("box bounds must be finite with lower <= upper".into()));
        }
        Ok(FeasibleSet::Box { lower, upper })
    }

    pub fn unbounded(dimension: usize) -> Self {
        FeasibleSet::Unbounded { dimension }
    }

    pub fn dimension(&self) -> usize {
        match self {
            FeasibleSet::EuclideanBall { center, .. } => center.len(),
            FeasibleSet::Box { lower, .. } => lower.len(),
            FeasibleSet::Unbounded { dimension } => *dimension,
        }
    }

    pub fn is_compact(&self) -> bool {
        !matches!(self, FeasibleSet::Unbounded { .. })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dimension() {
            return false;
        }
        match self {
            FeasibleSet::EuclideanBall { center, radius } => dist2(x, center) <= radius * (1.0 + DOMAIN_SLACK),
            FeasibleSet::Box { lower, upper } => x.iter().zip(lower.iter().zip(upper)).all(|(v, (l, u))| {
                let slack = DOMAIN_SLACK * (1.0 + l.abs().max(u.abs()));
                *v >= l - slack && *v <= u + slack
            }),
            FeasibleSet::Unbounded { .. } => true,
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &[f64]) -> Point {
        match self {
            FeasibleSet::EuclideanBall { center, radius } => {
                let offset = sub(x, center);
                let dist = norm2(&offset);
                if dist <= *radius {
                    x.to_vec()
                } else {
                    let shrink = radius / dist;
                    center.iter().zip(&offset).map(|(c, o)| c + shrink * o).collect()
                }
            }
            FeasibleSet::Box { lower, upper } => x.iter().zip(lower.iter().zip(upper)).map(|(v, (l, u))| v.clamp(*l, *u)).collect(),
            FeasibleSet::Unbounded { .. } => x.to_vec(),
        }
    }

    /// Draws a point from the set (uniform for balls and boxes, standard
    /// normal when unbounded).
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Point {
        match self {
            FeasibleSet::EuclideanBall { center, radius } => {
                let n = center.len();
                let dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let len = norm2(&dir).max(f64::MIN_POSITIVE);
                let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
                center.iter().zip(&dir).map(|(c, d)| c + r * d / len).collect()
            }
            FeasibleSet::Box { lower, upper } => lower.iter().zip(upper).map(|(l, u)| l + (u - l) * rng.random::<f64>()).collect(),
            FeasibleSet::Unbounded { dimension } => (0..*dimension).map(|_| rng.sample(StandardNormal)).collect(),
        }
    }
}

/// Distance-generating function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dgf {
    /// `0.5 * |x|_2^2`
    Euclidean,
    /// `0.5 * |x|_p^2`, `1 < p <= 2`
    PNorm { p: f64 },
}

impl Dgf {
    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Dgf::Euclidean => 0.5 * dot(x, x),
            Dgf::PNorm { p } => 0.5 * lp_norm(x, p).powi(2),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Point {
        match *self {
            Dgf::Euclidean => x.to_vec(),
            Dgf::PNorm { p } => lp_power_gradient(x, p),
        }
    }

    /// Gradient of the convex conjugate, i.e. the inverse mirror map.
    pub fn conjugate_gradient(&self, u: &[f64]) -> Point {
        match *self {
            Dgf::Euclidean => u.to_vec(),
            Dgf::PNorm { p } => lp_power_gradient(u, conjugate_exponent(p)),
        }
    }
}

/// Gradient of `0.5 * |x|_p^2`: `|x|_p^{2-p} sign(x_i) |x_i|^{p-1}`.
fn lp_power_gradient(x: &[f64], p: f64) -> Point {
    let norm = lp_norm(x, p);
    if norm == 0.0 {
        return vec![0.0; x.len()];
    }
    // Written relative to the norm so large exponents stay in range.
    x.iter().map(|v| norm * v.signum() * (v.abs() / norm).powf(p - 1.0)).collect()
}

/// Result of the prox Lipschitz diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzReport {
    pub max_ratio: f64,
    /// Trials that contributed a ratio (degenerate quadruples are skipped).
    pub evaluated: usize,
}

/// A distance-generating function on a feasible set with its norm pair and
/// the radius constants used by the convergence bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct MirrorGeometry {
    dgf: Dgf,
    norms: NormPair,
    domain: FeasibleSet,
    alpha: f64,
    d_omega: Option<f64>,
}

impl MirrorGeometry {
    pub fn euclidean(domain: FeasibleSet) -> Self {
        let d_omega = euclidean_d_omega(&domain);
        MirrorGeometry { dgf: Dgf::Euclidean, norms: NormPair::Euclidean, domain, alpha: 1.0, d_omega }
    }

    pub fn pnorm(p: f64, domain: FeasibleSet) -> Result<Self> {
        if !(p > 1.0 && p <= 2.0) {
            return Err(Error::Parameter(format!("p-norm geometry needs 1 < p <= 2 for a strongly convex DGF, got {p}")));
        }
        let d_omega = pnorm_d_omega(&domain, p);
        Ok(MirrorGeometry { dgf: Dgf::PNorm { p }, norms: NormPair::Lp { p }, domain, alpha: p - 1.0, d_omega })
    }

    /// Parses `"euclidean"` or `"pnorm:<p>"`.
    pub fn from_name(name: &str, domain: FeasibleSet) -> Result<Self> {
        let name = name.trim();
        if name.eq_ignore_ascii_case("euclidean") {
            return Ok(Self::euclidean(domain));
        }
        if let Some(p) = name.strip_prefix("pnorm:") {
            let p: f64 = p.trim().parse().map_err(|_| Error::Parameter(format!("cannot parse exponent in geometry {name:?}")))?;
            return Self::pnorm(p, domain);
        }
        Err(Error::Parameter(format!("unknown geometry {name:?}")))
    }

    pub fn dgf(&self) -> Dgf {
        self.dgf
    }

    pub fn norms(&self) -> NormPair {
        self.norms
    }

    pub fn domain(&self) -> &FeasibleSet {
        &self.domain
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c_star(&self) -> f64 {
        self.norms.c_star(self.dimension())
    }

    /// `sqrt(max_X omega - min_X omega)`; `None` on unbounded domains and on
    /// l_p geometries over off-center balls.
    pub fn d_omega(&self) -> Option<f64> {
        self.d_omega
    }

    /// `sqrt(2 D_omega^2 / alpha)`.
    pub fn omega_radius(&self) -> Option<f64> {
        self.d_omega.map(|d| (2.0 * d * d / self.alpha).sqrt())
    }

    pub fn omega(&self, x: &[f64]) -> f64 {
        self.dgf.value(x)
    }

    pub fn grad_omega(&self, x: &[f64]) -> Point {
        self.dgf.gradient(x)
    }

    fn check_member(&self, x: &[f64], what: &str) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::Shape { expected: format!("{}-vector", self.dimension()), actual: format!("{what} of length {}", x.len()) });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric(format!("{what} has non-finite entries")));
        }
        if !self.domain.contains(x) {
            return Err(Error::Domain(format!("{what} is not in the feasible set")));
        }
        Ok(())
    }

    /// Bregman divergence `V(x, z) = omega(z) - omega(x) - <grad omega(x), z - x>`.
    pub fn bregman(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        self.check_member(x, "x")?;
        self.check_member(z, "z")?;
        let grad = self.grad_omega(x);
        let diff = sub(z, x);
        let v = self.omega(z) - self.omega(x) - dot(&grad, &diff);
        Ok(v.max(0.0))
    }

    /// Minimizer of `omega` over the feasible set.
    pub fn initial_point(&self) -> Result<Point> {
        match self.dgf {
            Dgf::Euclidean => Ok(self.domain.project(&vec![0.0; self.dimension()])),
            Dgf::PNorm { .. } => match &self.domain {
                FeasibleSet::Box { lower, upper } => Ok(lower.iter().zip(upper).map(|(l, u)| 0.0_f64.clamp(*l, *u)).collect()),
                domain if domain.contains(&vec![0.0; self.dimension()]) => Ok(vec![0.0; self.dimension()]),
                _ => self.solve_linearized(&vec![0.0; self.dimension()]),
            },
        }
    }

    /// Prox mapping `P_x(y) = argmin_{z in X} <y, z - x> + V(x, z)`.
    pub fn prox_map(&self, x: &[f64], y: &[f64]) -> Result<Point> {
        if !x.iter().chain(y).all(|v| v.is_finite()) {
            return Err(Error::Numeric("prox map input has non-finite entries".into()));
        }
        if y.len() != self.dimension() {
            return Err(Error::Shape { expected: format!("{}-vector", self.dimension()), actual: format!("y of length {}", y.len()) });
        }
        self.check_member(x, "x")?;
        match self.dgf {
            Dgf::Euclidean => {
                let shifted: Point = x.iter().zip(y).map(|(a, b)| a - b).collect();
                Ok(self.domain.project(&shifted))
            }
            Dgf::PNorm { .. } => {
                // Minimizes omega(z) - <u, z> with u = grad omega(x) - y.
                let u: Point = self.grad_omega(x).iter().zip(y).map(|(g, v)| g - v).collect();
                let free = self.dgf.conjugate_gradient(&u);
                if self.domain.contains(&free) {
                    return Ok(self.domain.project(&free));
                }
                self.solve_linearized(&u)
            }
        }
    }

    /// Exact minimizer of `omega(z) - <u, z>` over the feasible set for the
    /// l_p DGF.
    ///
    /// With `N = |z|_p` held fixed the optimality conditions decouple by
    /// coordinate: `N^{2-p} sign(z_i) |z_i|^{p-1} + mu (z_i - c_i) = u_i` on a
    /// ball with multiplier `mu`, and a clamped scalar root on a box. Every
    /// `|z_i|` shrinks as `N` grows, so the consistent `N` is the unique root
    /// of `|z(N)|_p - N`. On a ball `|z(mu) - c|_2` decreases in `mu` and an
    /// outer bisection matches the radius.
    fn solve_linearized(&self, u: &[f64]) -> Result<Point> {
        let Dgf::PNorm { p } = self.dgf else {
            return Ok(self.domain.project(&self.dgf.conjugate_gradient(u)));
        };
        match &self.domain {
            FeasibleSet::Unbounded { .. } => Ok(self.dgf.conjugate_gradient(u)),
            FeasibleSet::Box { lower, upper } => {
                let coords = |kappa: f64| -> Point {
                    u.iter()
                        .zip(lower.iter().zip(upper))
                        .map(|(v, (l, h))| (v.signum() * scalar_root(kappa, 0.0, v.abs(), p)).clamp(*l, *h))
                        .collect()
                };
                let far: Vec<f64> = lower.iter().zip(upper).map(|(l, h)| l.abs().max(h.abs())).collect();
                consistent_norm(p, lp_norm(&far, p), coords)
            }
            FeasibleSet::EuclideanBall { center, radius } => {
                let at = |mu: f64| -> Result<Point> {
                    let rhs: Vec<f64> = u.iter().zip(center).map(|(v, c)| v + mu * c).collect();
                    let coords = |kappa: f64| -> Point { rhs.iter().map(|v| v.signum() * scalar_root(kappa, mu, v.abs(), p)).collect() };
                    let hi = lp_norm(&rhs, p) / mu;
                    consistent_norm(p, hi, coords)
                };
                let excess = |mu: f64| -> Result<f64> { Ok(dist2(&at(mu)?, center) - radius) };
                let free = dist2(&self.dgf.conjugate_gradient(u), center) - radius;
                let mut hi = 1.0;
                let mut f_hi = excess(hi)?;
                let mut lo = 0.0;
                let mut f_lo = free;
                while f_hi > 0.0 {
                    if hi > 1e300 {
                        return Err(Error::Convergence { iterations: 0, residual: f_hi });
                    }
                    (lo, f_lo) = (hi, f_hi);
                    hi *= 2.0;
                    f_hi = excess(hi)?;
                }
                let mu = decreasing_root(excess, (lo, f_lo), (hi, f_hi))?;
                Ok(self.domain.project(&at(mu)?))
            }
        }
    }

    /// Samples random quadruples `(x, x', y, y')` and reports the largest
    /// `|P_x(y) - P_x'(y')| / (|x - x'| + |y - y'|_*)`.
    pub fn check_prox_lipschitz(&self, trials: usize, seed: u64) -> Result<LipschitzReport> {
        let mut rng = rng::rng_for(&[seed, 0x4c49_5053]);
        let mut max_ratio = 0.0_f64;
        let mut evaluated = 0;
        let n = self.dimension();
        let y_scale = self.d_omega.unwrap_or(1.0);
        for _ in 0..trials.max(1) {
            let x = self.domain.sample(&mut rng);
            let xp = self.domain.sample(&mut rng);
            let y: Point = (0..n).map(|_| y_scale * rng.sample::<f64, _>(StandardNormal)).collect();
            let yp: Point = (0..n).map(|_| y_scale * rng.sample::<f64, _>(StandardNormal)).collect();
            if let Some(ratio) = self.prox_ratio(&x, &xp, &y, &yp)? {
                max_ratio = max_ratio.max(ratio);
                evaluated += 1;
            }
        }
        Ok(LipschitzReport { max_ratio, evaluated })
    }

    /// One quadruple of the Lipschitz diagnostic; `None` for `x = x', y = y'`.
    pub fn prox_ratio(&self, x: &[f64], xp: &[f64], y: &[f64], yp: &[f64]) -> Result<Option<f64>> {
        let denom = self.norms.primal_norm(&sub(x, xp)) + self.norms.dual_norm(&sub(y, yp));
        if denom == 0.0 {
            return Ok(None);
        }
        let a = self.prox_map(x, y)?;
        let b = self.prox_map(xp, yp)?;
        Ok(Some(self.norms.primal_norm(&sub(&a, &b)) / denom))
    }
}

/// `t >= 0` with `kappa t^{p-1} + mu t = a` for `a >= 0`, `1 < p <= 2`.
///
/// The left side is concave and increasing, so Newton started below the
/// root climbs to it monotonically.
fn scalar_root(kappa: f64, mu: f64, a: f64, p: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let q = 1.0 / (p - 1.0);
    if kappa == 0.0 {
        return a / mu;
    }
    if mu == 0.0 {
        return (a / kappa).powf(q);
    }
    let lo = (0.5 * a / mu).min((0.5 * a / kappa).powf(q));
    let hi = (a / mu).min((a / kappa).powf(q));
    let mut t = lo;
    for _ in 0..100 {
        let f = kappa * t.powf(p - 1.0) + mu * t - a;
        let df = kappa * (p - 1.0) * t.powf(p - 2.0) + mu;
        let next = (t - f / df).clamp(lo, hi);
        if (next - t).abs() <= 1e-16 * t {
            return next;
        }
        t = next;
    }
    t
}

/// Solves `|z(N^{2-p})|_p = N` for `N` in `[0, hi]` by bisection and
/// returns `z`.
fn consistent_norm(p: f64, hi: f64, coords: impl Fn(f64) -> Point) -> Result<Point> {
    if p == 2.0 || hi == 0.0 {
        return Ok(coords(1.0));
    }
    let gap = |n: f64| -> Result<f64> { Ok(lp_norm(&coords(n.powf(2.0 - p)), p) - n) };
    let f_hi = gap(hi)?;
    if f_hi >= 0.0 {
        return Ok(coords(hi.powf(2.0 - p)));
    }
    let lo = hi * 1e-300_f64.max(f64::MIN_POSITIVE);
    let n = decreasing_root(gap, (lo, gap(lo)?), (hi, f_hi))?;
    Ok(coords(n.powf(2.0 - p)))
}

/// Root of a decreasing function bracketed by `f(a) > 0 >= f(b)`, by
/// Illinois-modified regula falsi.
fn decreasing_root(f: impl Fn(f64) -> Result<f64>, a: (f64, f64), b: (f64, f64)) -> Result<f64> {
    let ((mut a, mut fa), (mut b, mut fb)) = (a, b);
    if fa <= 0.0 {
        return Ok(a);
    }
    let mut side = 0;
    for _ in 0..PROX_MAX_ITERATIONS {
        if b - a <= 4.0 * f64::EPSILON * b.abs() {
            return Ok(b);
        }
        let mut c = b - fb * (b - a) / (fb - fa);
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let fc = f(c)?;
        if fc == 0.0 {
            return Ok(c);
        }
        if fc > 0.0 {
            (a, fa) = (c, fc);
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            (b, fb) = (c, fc);
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
    }
    Err(Error::Convergence { iterations: PROX_MAX_ITERATIONS, residual: b - a })
}

fn euclidean_d_omega(domain: &FeasibleSet) -> Option<f64> {
    let (max, min) = match domain {
        FeasibleSet::EuclideanBall { center, radius } => {
            let c = norm2(center);
            (0.5 * (c + radius).powi(2), 0.5 * (c - radius).max(0.0).powi(2))
        }
        FeasibleSet::Box { lower, upper } => {
            let max: f64 = lower.iter().zip(upper).map(|(l, u)| 0.5 * (l * l).max(u * u)).sum();
            let min: f64 = lower.iter().zip(upper).map(|(l, u)| 0.5 * 0.0_f64.clamp(*l, *u).powi(2)).sum();
            (max, min)
        }
        FeasibleSet::Unbounded { .. } => return None,
    };
    Some((max - min).max(0.0).sqrt())
}

fn pnorm_d_omega(domain: &FeasibleSet, p: f64) -> Option<f64> {
    let (max, min) = match domain {
        FeasibleSet::EuclideanBall { center, radius } if center.iter().all(|c| *c == 0.0) => {
            // |x|_p <= n^{1/p - 1/2} |x|_2 for p <= 2, attained on the diagonal.
            let n = center.len() as f64;
            (0.5 * (radius * n.powf(1.0 / p - 0.5)).powi(2), 0.0)
        }
        FeasibleSet::Box { lower, upper } => {
            let far: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| l.abs().max(u.abs())).collect();
            let near: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| 0.0_f64.clamp(*l, *u)).collect();
            (0.5 * lp_norm(&far, p).powi(2), 0.5 * lp_norm(&near, p).powi(2))
        }
        _ => return None,
    };
    Some((max - min).max(0.0).sqrt())
}
