//! Scalar re-evaluation of the theorem quantities, written from the displayed
//! formulas without sharing code with the library. Powers are expanded by
//! repeated multiplication instead of log space.

pub struct Consts {
    pub l: f64,
    pub m_lip: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub c_star: f64,
    pub d_omega: f64,
}

pub struct Inputs {
    pub m: usize,
    pub lambda2: f64,
    pub r: usize,
    pub b: usize,
    pub s_total: usize,
    pub gamma: f64,
}

fn pow(x: f64, k: usize) -> f64 {
    let mut out = 1.0;
    for _ in 0..k {
        out *= x;
    }
    out
}

/// `(1 + a)^s - 1` through `g_{k+1} = g_k (1 + a) + a`, free of cancellation
/// for small `a`.
fn grow(a: f64, s: usize) -> f64 {
    let mut g = 0.0;
    for _ in 0..s {
        g = g * (1.0 + a) + a;
    }
    g
}

fn lam_r(i: &Inputs) -> f64 {
    // a single node has nothing to mix: |W^r - J| = 0
    if i.m == 1 {
        0.0
    } else {
        pow(i.lambda2, i.r)
    }
}

pub fn xi_1(c: &Consts, i: &Inputs, s: usize) -> f64 {
    let m = i.m as f64;
    let root_c = c.c_star.sqrt();
    let lr = lam_r(i);
    let first = c.m_lip + c.sigma / (i.b as f64).sqrt();
    first * (1.0 + m * m * root_c * lr) * grow(c.alpha * m * m * root_c * lr, s) + 2.0 * c.m_lip
}

pub fn delta2_1(c: &Consts, i: &Inputs, s: usize) -> f64 {
    let m = i.m as f64;
    let b = i.b as f64;
    let lr = lam_r(i);
    let first = c.m_lip + c.sigma / b.sqrt();
    let g = grow(c.alpha * m * m * c.c_star.sqrt() * lr, s);
    let sig2 = c.sigma * c.sigma;
    2.0 * first * first * (1.0 + pow(m, 4) * c.c_star * lr * lr) * g * g
        + 4.0 * c.c_star * sig2 / (m * b)
        + 4.0 * lr * lr * c.c_star * sig2 * m * m / b
        + 4.0 * c.m_lip * c.m_lip
}

fn g_2(c: &Consts, i: &Inputs, s: usize) -> f64 {
    let m = i.m as f64;
    let gamma_s = (s as f64 + 1.0) * i.gamma / 2.0;
    grow(2.0 * gamma_s * m * m * c.c_star.sqrt() * c.l * lam_r(i), s)
}

pub fn xi_2(c: &Consts, i: &Inputs, s: usize) -> f64 {
    let m = i.m as f64;
    let first = c.m_lip + c.sigma / (i.b as f64).sqrt();
    first * (1.0 + c.c_star.sqrt() * m * m * lam_r(i)) * g_2(c, i, s) + 2.0 * c.m_lip
}

pub fn delta2_2(c: &Consts, i: &Inputs, s: usize) -> f64 {
    let m = i.m as f64;
    let b = i.b as f64;
    let lr = lam_r(i);
    let first = c.m_lip + c.sigma / b.sqrt();
    let g = g_2(c, i, s);
    2.0 * first * first * g * g + 4.0 * c.c_star * c.sigma * c.sigma / b * (lr * lr * m * m + 1.0 / m) + 4.0 * c.m_lip * c.m_lip
}

pub fn gamma_star_1(c: &Consts, i: &Inputs) -> f64 {
    let s = i.s_total as f64;
    let d2 = delta2_1(c, i, i.s_total);
    let a = c.alpha / (2.0 * c.l);
    let b = (c.alpha * c.d_omega * c.d_omega / (2.0 * s * (4.0 * c.m_lip * c.m_lip + 2.0 * d2))).sqrt();
    if a < b {
        a
    } else {
        b
    }
}

pub fn gamma_star_2(c: &Consts, i: &Inputs) -> f64 {
    let s = i.s_total as f64;
    let d2 = delta2_2(c, i, i.s_total);
    let a = c.alpha / (2.0 * c.l);
    let b = (c.alpha * c.d_omega * c.d_omega / (s * (s * s + 1.0) * (4.0 * c.m_lip * c.m_lip + d2))).sqrt();
    if a < b {
        a
    } else {
        b
    }
}

use dsamd_core::bounds::{self, BoundInputs, MTerm, ProblemConstants};

pub struct GridReport {
    pub max_rel: f64,
    pub compared: usize,
    /// Values where exactly one side was finite.
    pub mismatched: usize,
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Evaluates the library and the oracle on `points` pseudo-random parameter
/// sets, every round `s <= S`, and compares.
pub fn compare_grid(points: usize, seed: u64) -> GridReport {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut report = GridReport { max_rel: 0.0, compared: 0, mismatched: 0 };
    let mut check = |lib: f64, ora: f64| {
        if lib.is_finite() && ora.is_finite() {
            report.max_rel = report.max_rel.max(rel(lib, ora));
            report.compared += 1;
        } else if lib.is_finite() != ora.is_finite() {
            report.mismatched += 1;
        }
    };
    for _ in 0..points {
        let sigma: f64 = rng.random_range(0.0..5.0);
        let c = Consts {
            l: rng.random_range(0.1..10.0),
            m_lip: if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..1.0) },
            sigma,
            alpha: rng.random_range(0.2..=1.0),
            c_star: rng.random_range(1.0..10.0),
            d_omega: rng.random_range(0.1..10.0),
        };
        let i = Inputs {
            m: 1 << rng.random_range(0..7),
            lambda2: if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..0.95) },
            r: rng.random_range(0..40),
            b: rng.random_range(1..64),
            s_total: rng.random_range(1..60),
            gamma: 10f64.powf(rng.random_range(-4.0..1.0)),
        };
        let pc = ProblemConstants {
            l: c.l,
            m_lip: c.m_lip,
            sigma2: sigma * sigma,
            alpha: c.alpha,
            c_star: c.c_star,
            d_omega: c.d_omega,
            omega_radius: (2.0 * c.d_omega * c.d_omega / c.alpha).sqrt(),
        };
        let bi = BoundInputs { m: i.m, lambda2: i.lambda2, r: i.r, b: i.b, s: i.s_total, gamma: i.gamma };
        for s in 1..=i.s_total {
            check(bounds::xi_dsamd(&pc, &bi, s).unwrap(), xi_1(&c, &i, s));
            check(bounds::delta2_dsamd(&pc, &bi, s, MTerm::Squared).unwrap(), delta2_1(&c, &i, s));
            check(bounds::xi_adsamd(&pc, &bi, s).unwrap(), xi_2(&c, &i, s));
            check(bounds::delta2_adsamd(&pc, &bi, s, MTerm::Squared).unwrap(), delta2_2(&c, &i, s));
        }
        check(bounds::gamma_star_dsamd(&pc, &bi, MTerm::Squared).unwrap(), gamma_star_1(&c, &i));
        check(bounds::gamma_star_adsamd(&pc, &bi, MTerm::Squared).unwrap(), gamma_star_2(&c, &i));
    }
    report
}
