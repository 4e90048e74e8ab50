//! Expectations of logistic functions of a Gaussian scalar.
//!
//! With Gaussian class-conditional features, the margin `y^T x + x0` given
//! the label is `N(mean, var)`, so the population logistic loss and its
//! derivatives reduce to one-dimensional Gaussian expectations.
//!
//! Each integrand is split into a piece with a closed-form Gaussian
//! expectation (`max(z, 0)` for softplus, the unit step for the sigmoid) and a
//! remainder that decays like `e^-|z|`. The remainder is integrated with
//! composite 8-point Gauss-Legendre over `|z| <= 40` intersected with
//! `mean +- 8.5 sd`, with a panel break at `z = 0` where it has a kink. The
//! cost therefore stays bounded however wide the Gaussian is.

const SD_RANGE: f64 = 8.5;
const Z_RANGE: f64 = 40.0;
const PANEL_WIDTH: f64 = 1.5;
/// Panel width in standard deviations, so narrow Gaussians stay resolved.
const PANEL_SDS: f64 = 1.0;

const GL_NODES: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL_WEIGHTS: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `log(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Gaussian expectations of softplus and the first three derivatives of the
/// sigmoid.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LogisticMoments {
    pub softplus: f64,
    pub sigmoid: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

fn point(z: f64) -> LogisticMoments {
    let s = sigmoid(z);
    let d1 = s * (1.0 - s);
    LogisticMoments { softplus: softplus(z), sigmoid: s, d1, d2: d1 * (1.0 - 2.0 * s), d3: d1 * (1.0 - 6.0 * d1) }
}

/// Integrates the decaying remainders against the `N(mean, sd^2)` density on
/// `[lo, hi]`.
fn integrate_remainder(mean: f64, sd: f64, lo: f64, hi: f64, acc: &mut LogisticMoments) {
    if hi <= lo {
        return;
    }
    let width = PANEL_WIDTH.min(PANEL_SDS * sd);
    let panels = ((hi - lo) / width).ceil().max(1.0) as usize;
    let h = (hi - lo) / panels as f64;
    let inv_sd = 1.0 / sd;
    for k in 0..panels {
        let mid = lo + (k as f64 + 0.5) * h;
        for (&x, &w) in GL_NODES.iter().zip(&GL_WEIGHTS) {
            for sign in [-1.0, 1.0] {
                let z = mid + sign * x * h / 2.0;
                let u = (z - mean) * inv_sd;
                let weight = w * h / 2.0 * INV_SQRT_2PI * inv_sd * (-0.5 * u * u).exp();
                let tail = (-z.abs()).exp();
                let rest_softplus = tail.ln_1p();
                // sigmoid(z) - step(z) = -+ sigmoid(-|z|).
                let small = tail / (1.0 + tail);
                let rest_sigmoid = if z >= 0.0 { -small } else { small };
                let d1 = small * (1.0 - small);
                let d2 = d1 * if z >= 0.0 { 2.0 * small - 1.0 } else { 1.0 - 2.0 * small };
                acc.softplus += weight * rest_softplus;
                acc.sigmoid += weight * rest_sigmoid;
                acc.d1 += weight * d1;
                acc.d2 += weight * d2;
                acc.d3 += weight * d1 * (1.0 - 6.0 * d1);
            }
        }
    }
}

pub fn logistic_moments(mean: f64, std_dev: f64) -> LogisticMoments {
    if std_dev == 0.0 {
        return point(mean);
    }
    let t = mean / std_dev;
    let phi = INV_SQRT_2PI * (-0.5 * t * t).exp();
    let cdf = normal_cdf(t);
    let mut acc = LogisticMoments { softplus: mean * cdf + std_dev * phi, sigmoid: cdf, ..Default::default() };
    let lo = (mean - SD_RANGE * std_dev).max(-Z_RANGE);
    let hi = (mean + SD_RANGE * std_dev).min(Z_RANGE);
    if lo < 0.0 && hi > 0.0 {
        integrate_remainder(mean, std_dev, lo, 0.0, &mut acc);
        integrate_remainder(mean, std_dev, 0.0, hi, &mut acc);
    } else {
        integrate_remainder(mean, std_dev, lo, hi, &mut acc);
    }
    acc
}

/// `E[softplus(mean + std_dev * eps)]`, `eps ~ N(0, 1)`.
pub fn expected_softplus(mean: f64, std_dev: f64) -> f64 {
    logistic_moments(mean, std_dev).softplus
}
