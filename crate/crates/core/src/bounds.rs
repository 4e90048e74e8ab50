//! Theoretical gap bounds and sizing conditions for D-SAMD and AD-SAMD.
//!
//! The closed-form bounds do not depend on the step size once the optimal
//! `gamma*` has been substituted, so `gamma*` is reported alongside them. The
//! AD-SAMD noise moments do depend on the step sequence `gamma_s = gamma
//! (s+1)/2`; they take the base step from [`BoundInputs::gamma`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MirrorGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    /// Gradient Lipschitz constant of the smooth part.
    pub l: f64,
    /// Lipschitz constant of the nonsmooth part.
    pub m_lip: f64,
    /// Subgradient noise variance.
    pub sigma2: f64,
    pub alpha: f64,
    pub c_star: f64,
    pub d_omega: f64,
    pub omega_radius: f64,
}

impl ProblemConstants {
    /// Constants for `geometry`; fails on unbounded domains.
    pub fn from_geometry(geometry: &MirrorGeometry, l: f64, m_lip: f64, sigma2: f64) -> Result<Self> {
        let d_omega = geometry.d_omega().ok_or_else(|| Error::Domain("bounds need a compact feasible set".into()))?;
        let c = ProblemConstants {
            l,
            m_lip,
            sigma2,
            alpha: geometry.alpha(),
            c_star: geometry.c_star(),
            d_omega,
            omega_radius: geometry.omega_radius().unwrap_or(f64::NAN),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [self.l, self.m_lip, self.sigma2];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Parameter("L, M and sigma2 must be finite and nonnegative".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) || !(self.c_star >= 1.0 && self.c_star.is_finite()) {
            return Err(Error::Parameter("alpha must be positive and C* at least 1".into()));
        }
        if !(self.d_omega > 0.0 && self.d_omega.is_finite() && self.omega_radius > 0.0 && self.omega_radius.is_finite()) {
            return Err(Error::Domain("D_omega and Omega_omega must be finite and positive (compact domain)".into()));
        }
        Ok(())
    }

    fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub m: usize,
    pub lambda2: f64,
    pub r: usize,
    pub b: usize,
    pub s: usize,
    pub gamma: f64,
}

impl BoundInputs {
    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.b == 0 || self.s == 0 {
            return Err(Error::Parameter("m, b and S must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.lambda2) {
            return Err(Error::Parameter(format!("lambda2 must lie in [0, 1), got {}", self.lambda2)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Parameter("gamma must be finite and nonnegative".into()));
        }
        Ok(())
    }

    /// Consensus contraction `|W^r - 11^T/m|`: `lambda2^r` (with `0^0 = 1`)
    /// on a network, zero for a single node whatever `r` is.
    fn lambda_r(&self) -> f64 {
        if self.m == 1 {
            0.0
        } else {
            self.lambda2.powi(self.r as i32)
        }
    }
}

/// Whether the bare `M` appearing in the noise terms is read as `M` or `M^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MTerm {
    Linear,
    #[default]
    Squared,
}

impl MTerm {
    fn apply(self, m_lip: f64) -> f64 {
        match self {
            MTerm::Linear => m_lip,
            MTerm::Squared => m_lip * m_lip,
        }
    }
}

/// `(1 + a)^s - 1` evaluated as `expm1(s log1p(a))`.
pub fn growth(a: f64, s: usize) -> f64 {
    (s as f64 * a.ln_1p()).exp_m1()
}

fn check_round(inputs: &BoundInputs, s: usize) -> Result<()> {
    inputs.validate()?;
    if s > inputs.s {
        return Err(Error::Parameter(format!("round {s} exceeds S = {}", inputs.s)));
    }
    Ok(())
}

fn dsamd_rate(c: &ProblemConstants, inputs: &BoundInputs) -> f64 {
    let m2 = (inputs.m * inputs.m) as f64;
    c.alpha * m2 * c.c_star.sqrt() * inputs.lambda_r()
}

pub fn xi_dsamd(c: &ProblemConstants, inputs: &BoundInputs, s: usize) -> Result<f64> {
    check_round(inputs, s)?;
    let m2 = (inputs.m * inputs.m) as f64;
    let lead = c.m_lip + c.sigma() / (inputs.b as f64).sqrt();
    Ok(lead * (1.0 + m2 * c.c_star.sqrt() * inputs.lambda_r()) * growth(dsamd_rate(c, inputs), s) + 2.0 * c.m_lip)
}

pub fn delta2_dsamd(c: &ProblemConstants, inputs: &BoundInputs, s: usize, m_term: MTerm) -> Result<f64> {
    check_round(inputs, s)?;
    let m = inputs.m as f64;
    let b = inputs.b as f64;
    let lr = inputs.lambda_r();
    let lead = c.m_lip + c.sigma() / b.sqrt();
    let g = growth(dsamd_rate(c, inputs), s);
    Ok(2.0 * lead * lead * (1.0 + m.powi(4) * c.c_star * lr * lr) * g * g
        + 4.0 * c.c_star * c.sigma2 / (m * b)
        + 4.0 * lr * lr * c.c_star * c.sigma2 * m * m / b
        + 4.0 * m_term.apply(c.m_lip))
}

/// Step `gamma_s = gamma (s+1)/2` of the accelerated scheme.
fn adsamd_step(inputs: &BoundInputs, s: usize) -> f64 {
    inputs.gamma * (s as f64 + 1.0) / 2.0
}

fn adsamd_growth(c: &ProblemConstants, inputs: &BoundInputs, s: usize) -> f64 {
    let m2 = (inputs.m * inputs.m) as f64;
    let a = 2.0 * adsamd_step(inputs, s) * m2 * c.c_star.sqrt() * c.l * inputs.lambda_r();
    growth(a, s)
}

pub fn xi_adsamd(c: &ProblemConstants, inputs: &BoundInputs, s: usize) -> Result<f64> {
    check_round(inputs, s)?;
    let m2 = (inputs.m * inputs.m) as f64;
    let lead = c.m_lip + c.sigma() / (inputs.b as f64).sqrt();
    Ok(lead * (1.0 + c.c_star.sqrt() * m2 * inputs.lambda_r()) * adsamd_growth(c, inputs, s) + 2.0 * c.m_lip)
}

pub fn delta2_adsamd(c: &ProblemConstants, inputs: &BoundInputs, s: usize, m_term: MTerm) -> Result<f64> {
    check_round(inputs, s)?;
    let m = inputs.m as f64;
    let b = inputs.b as f64;
    let lr = inputs.lambda_r();
    let lead = c.m_lip + c.sigma() / b.sqrt();
    let g = adsamd_growth(c, inputs, s);
    Ok(2.0 * lead * lead * g * g + 4.0 * c.c_star * c.sigma2 / b * (lr * lr * m * m + 1.0 / m) + 4.0 * m_term.apply(c.m_lip))
}

pub fn gamma_star_dsamd(c: &ProblemConstants, inputs: &BoundInputs, m_term: MTerm) -> Result<f64> {
    let d2 = delta2_dsamd(c, inputs, inputs.s, m_term)?;
    let noise = 4.0 * c.m_lip * c.m_lip + 2.0 * d2;
    let cap = c.alpha / (2.0 * c.l);
    Ok(cap.min((c.alpha * c.d_omega * c.d_omega / (2.0 * inputs.s as f64 * noise)).sqrt()))
}

pub fn gamma_star_adsamd(c: &ProblemConstants, inputs: &BoundInputs, m_term: MTerm) -> Result<f64> {
    let d2 = delta2_adsamd(c, inputs, inputs.s, m_term)?;
    let noise = 4.0 * c.m_lip * c.m_lip + d2;
    let s = inputs.s as f64;
    let cap = c.alpha / (2.0 * c.l);
    Ok(cap.min((c.alpha * c.d_omega * c.d_omega / (s * (s * s + 1.0) * noise)).sqrt()))
}

/// Three-term bound with its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapBound {
    pub deterministic: f64,
    pub noise: f64,
    pub bias: f64,
    pub total: f64,
    pub gamma_star: f64,
    pub xi: f64,
    pub delta2: f64,
}

pub fn gap_bound_dsamd(c: &ProblemConstants, inputs: &BoundInputs, m_term: MTerm) -> Result<GapBound> {
    c.validate()?;
    let s = inputs.s as f64;
    let xi = xi_dsamd(c, inputs, inputs.s)?;
    let delta2 = delta2_dsamd(c, inputs, inputs.s, m_term)?;
    let deterministic = 2.0 * c.l * c.omega_radius * c.omega_radius / (c.alpha * s);
    let noise = (2.0 * (4.0 * c.m_lip * c.m_lip + 2.0 * delta2) / (c.alpha * s)).sqrt();
    let bias = (c.alpha / 2.0).sqrt() * xi * c.d_omega / c.l;
    Ok(GapBound {
        deterministic,
        noise,
        bias,
        total: deterministic + noise + bias,
        gamma_star: gamma_star_dsamd(c, inputs, m_term)?,
        xi,
        delta2,
    })
}

pub fn gap_bound_adsamd(c: &ProblemConstants, inputs: &BoundInputs, m_term: MTerm) -> Result<GapBound> {
    c.validate()?;
    let s = inputs.s as f64;
    let xi = xi_adsamd(c, inputs, inputs.s)?;
    let delta2 = delta2_adsamd(c, inputs, inputs.s, m_term)?;
    let deterministic = 8.0 * c.l * c.d_omega * c.d_omega / (c.alpha * s * s);
    let noise = 4.0 * c.d_omega * ((4.0 * m_term.apply(c.m_lip) + delta2) / (c.alpha * s)).sqrt();
    let bias = (32.0 / c.alpha).sqrt() * c.d_omega * xi;
    Ok(GapBound {
        deterministic,
        noise,
        bias,
        total: deterministic + noise + bias,
        gamma_star: gamma_star_adsamd(c, inputs, m_term)?,
        xi,
        delta2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Dsamd,
    Adsamd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionFlags {
    /// `b_min <= b_max`: some mini-batch size meets both requirements.
    pub batch: bool,
    pub rho: bool,
    pub horizon: bool,
    pub nonsmooth: bool,
}

impl ConditionFlags {
    pub fn all(&self) -> bool {
        self.batch && self.rho && self.horizon && self.nonsmooth
    }
}

/// Order-wise corollary conditions evaluated with unit constants, except
/// `c_mult` on the lower batch bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorollaryReport {
    pub variant: Variant,
    pub b_min: usize,
    pub b_max: f64,
    pub rho_min: f64,
    pub t_min: f64,
    pub m_max: f64,
    pub satisfied: ConditionFlags,
}

pub fn corollary_conditions(
    c: &ProblemConstants,
    m: usize,
    horizon: usize,
    rho: f64,
    lambda2: f64,
    variant: Variant,
    c_mult: f64,
) -> Result<CorollaryReport> {
    if m == 0 || horizon == 0 || !(rho > 0.0) {
        return Err(Error::Parameter("m, T and rho must be positive".into()));
    }
    if !(0.0..1.0).contains(&lambda2) {
        return Err(Error::Parameter(format!("lambda2 must lie in [0, 1), got {lambda2}")));
    }
    let mf = m as f64;
    let t = horizon as f64;
    let sigma = c.sigma();
    let m_max = (1.0 / mf).min(1.0 / (mf * c.sigma2 * t).sqrt());
    let (b_max, t_min) = match variant {
        Variant::Dsamd => (sigma * t.sqrt() / mf.sqrt(), mf / c.sigma2),
        Variant::Adsamd => (sigma.sqrt() * t.powf(0.75) / mf.powf(0.25), mf.powf(1.0 / 3.0) / c.sigma2),
    };
    let (b_min, rho_min) = if m == 1 {
        (1, 0.0)
    } else if lambda2 == 0.0 {
        ((1.0 / rho - 1e-9).ceil().max(1.0) as usize, 0.0)
    } else {
        let log_ratio = (1.0 / lambda2).ln();
        let log_mt = (mf * t).ln();
        let b_min = (c_mult * log_mt / (rho * log_ratio)).ceil().max(1.0) as usize;
        let rho_min = match variant {
            Variant::Dsamd => mf.sqrt() * log_mt / (sigma * t.sqrt() * log_ratio),
            Variant::Adsamd => mf.powf(0.25) * log_mt / (sigma * t.powf(0.75) * log_ratio),
        };
        (b_min, rho_min)
    };
    let satisfied =
        ConditionFlags { batch: m == 1 || b_min as f64 <= b_max, rho: rho >= rho_min, horizon: t >= t_min, nonsmooth: c.m_lip <= m_max };
    Ok(CorollaryReport { variant, b_min, b_max, rho_min, t_min, m_max, satisfied })
}
