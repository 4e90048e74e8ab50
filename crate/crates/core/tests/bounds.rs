mod support;

use dsamd_core::bounds::{
    corollary_conditions, delta2_adsamd, delta2_dsamd, gap_bound_adsamd, gap_bound_dsamd, xi_dsamd, BoundInputs, MTerm, ProblemConstants,
    Variant,
};
use dsamd_core::{FeasibleSet, MirrorGeometry};
use support::bounds_oracle::{self, Consts, Inputs};
use support::rel_err;

fn unit() -> ProblemConstants {
    ProblemConstants { l: 1.0, m_lip: 0.0, sigma2: 1.0, alpha: 1.0, c_star: 1.0, d_omega: 1.0, omega_radius: 2f64.sqrt() }
}

fn inputs(m: usize, lambda2: f64, r: usize, b: usize, s: usize) -> BoundInputs {
    BoundInputs { m, lambda2, r, b, s, gamma: 0.1 }
}

#[test]
fn grid_matches_independent_evaluation() {
    let report = bounds_oracle::compare_grid(100, 2024);
    println!("compared {} values, max relative difference {:.3e}", report.compared, report.max_rel);
    assert!(report.compared > 10_000, "{}", report.compared);
    assert_eq!(report.mismatched, 0);
    assert!(report.max_rel <= 1e-12, "{}", report.max_rel);
}

#[test]
fn worked_example() {
    let c = unit();
    let i = inputs(2, 0.5, 2, 4, 3);
    let oc = Consts { l: 1.0, m_lip: 0.0, sigma: 1.0, alpha: 1.0, c_star: 1.0, d_omega: 1.0 };
    let oi = Inputs { m: 2, lambda2: 0.5, r: 2, b: 4, s_total: 3, gamma: 0.1 };
    // (1/2) * (1 + 4/4) * ((1 + 1)^3 - 1) = 7
    assert!(rel_err(xi_dsamd(&c, &i, 3).unwrap(), 7.0) < 1e-15);
    assert!(rel_err(xi_dsamd(&c, &i, 3).unwrap(), bounds_oracle::xi_1(&oc, &oi, 3)) < 1e-15);
    // 2 (1/4) (1 + 16/16) 49 + 4/8 + 4 (1/16) 4 / 4 = 49.75
    let d2 = delta2_dsamd(&c, &i, 3, MTerm::Squared).unwrap();
    assert!(rel_err(d2, 49.75) < 1e-15, "{d2}");
    assert!(rel_err(d2, bounds_oracle::delta2_1(&oc, &oi, 3)) < 1e-15);
}

#[test]
fn perfect_mixing_examples() {
    let c = unit();
    assert_eq!(xi_dsamd(&c, &inputs(4, 0.0, 1, 4, 5), 5).unwrap(), 0.0);
    let cm = ProblemConstants { m_lip: 0.25, ..c };
    assert!((xi_dsamd(&cm, &inputs(4, 0.0, 1, 4, 5), 5).unwrap() - 0.5).abs() < 1e-15);
    let d2 = delta2_dsamd(&ProblemConstants { sigma2: 3.0, c_star: 2.0, ..c }, &inputs(4, 0.0, 1, 5, 5), 5, MTerm::Squared).unwrap();
    assert!(rel_err(d2, 4.0 * 2.0 * 3.0 / 20.0) < 1e-15);
    let quiet = ProblemConstants { sigma2: 0.0, ..c };
    assert_eq!(delta2_dsamd(&quiet, &inputs(4, 0.0, 1, 4, 5), 5, MTerm::Squared).unwrap(), 0.0);
}

#[test]
fn single_node_reduces_to_mini_batch_variance() {
    let c = ProblemConstants { m_lip: 0.3, sigma2: 2.0, c_star: 1.5, ..unit() };
    for lambda2 in [0.0, 0.4, 0.9] {
        let d2 = delta2_dsamd(&c, &inputs(1, lambda2, 0, 8, 10), 10, MTerm::Linear).unwrap();
        assert!(rel_err(d2, 4.0 * 1.5 * 2.0 / 8.0 + 4.0 * 0.3) < 1e-15, "{lambda2}: {d2}");
    }
}

#[test]
fn m_term_toggle() {
    let c = ProblemConstants { m_lip: 0.5, ..unit() };
    let i = inputs(4, 0.0, 1, 4, 5);
    let lin = delta2_dsamd(&c, &i, 5, MTerm::Linear).unwrap();
    let sq = delta2_dsamd(&c, &i, 5, MTerm::Squared).unwrap();
    assert!((lin - sq - 4.0 * (0.5 - 0.25)).abs() < 1e-15);
}

#[test]
fn dsamd_bound_examples() {
    let c = unit();
    let a = gap_bound_dsamd(&c, &inputs(4, 0.0, 1, 4, 100), MTerm::Squared).unwrap();
    let b = gap_bound_dsamd(&c, &inputs(4, 0.0, 1, 4, 200), MTerm::Squared).unwrap();
    assert!((a.noise / b.noise - 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(a.bias, 0.0);
    let far = gap_bound_dsamd(&c, &inputs(4, 0.0, 1, 4, 100_000_000), MTerm::Squared).unwrap();
    assert!(far.total < 1e-3);
}

#[test]
fn adsamd_bound_examples() {
    let quiet = ProblemConstants { sigma2: 0.0, ..unit() };
    let g = gap_bound_adsamd(&quiet, &inputs(4, 0.0, 1, 4, 10), MTerm::Squared).unwrap();
    assert!(rel_err(g.total, 8.0 / 100.0) < 1e-15);
    let a = gap_bound_adsamd(&unit(), &inputs(4, 0.0, 1, 4, 50), MTerm::Squared).unwrap();
    let b = gap_bound_adsamd(&unit(), &inputs(4, 0.0, 1, 4, 100), MTerm::Squared).unwrap();
    assert!((a.noise / b.noise - 2f64.sqrt()).abs() < 1e-12);
    for s in 5..200 {
        let d = gap_bound_dsamd(&unit(), &inputs(4, 0.3, 5, 4, s), MTerm::Squared).unwrap();
        let a = gap_bound_adsamd(&unit(), &inputs(4, 0.3, 5, 4, s), MTerm::Squared).unwrap();
        assert!(a.deterministic < d.deterministic, "S = {s}");
    }
}

#[test]
fn sequences_are_nondecreasing() {
    let c = ProblemConstants { m_lip: 0.1, sigma2: 2.0, c_star: 3.0, ..unit() };
    for (lambda2, r) in [(0.2, 3), (0.6, 10), (0.9, 2)] {
        let i = BoundInputs { m: 8, lambda2, r, b: 4, s: 50, gamma: 0.01 };
        let mut prev = (0.0, 0.0, 0.0);
        for s in 1..=50 {
            let cur = (
                xi_dsamd(&c, &i, s).unwrap(),
                delta2_dsamd(&c, &i, s, MTerm::Squared).unwrap(),
                delta2_adsamd(&c, &i, s, MTerm::Squared).unwrap(),
            );
            assert!(cur.0 >= prev.0 && cur.1 >= prev.1 && cur.2 >= prev.2);
            prev = cur;
        }
    }
}

#[test]
fn bounds_are_finite_and_nonincreasing_in_s() {
    let c = ProblemConstants { m_lip: 0.0, sigma2: 4.0, c_star: 1.0, ..unit() };
    for (m, lambda2, r) in [(16, 0.0, 1), (16, 0.5, 60), (64, 0.3, 40)] {
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for s in 1..=2000 {
            let i = BoundInputs { m, lambda2, r, b: 8, s, gamma: 0.01 };
            let d = gap_bound_dsamd(&c, &i, MTerm::Squared).unwrap().total;
            let a = gap_bound_adsamd(&c, &i, MTerm::Squared).unwrap().total;
            assert!(d.is_finite() && d > 0.0 && a.is_finite() && a > 0.0);
            assert!(d <= prev.0 && a <= prev.1, "m {m} lambda2 {lambda2} r {r} S {s}");
            prev = (d, a);
        }
    }
}

#[test]
fn log_space_powers_do_not_overflow() {
    let c = unit();
    let i = BoundInputs { m: 4, lambda2: 0.5, r: 30, b: 4, s: 1_000_000, gamma: 1e-3 };
    let g = gap_bound_dsamd(&c, &i, MTerm::Squared).unwrap();
    assert!(g.total.is_finite(), "{g:?}");
}

#[test]
fn input_errors() {
    let c = unit();
    assert!(xi_dsamd(&c, &inputs(4, 1.0, 1, 4, 5), 5).is_err());
    assert!(xi_dsamd(&c, &inputs(4, 0.5, 1, 4, 5), 6).is_err());
    assert!(xi_dsamd(&c, &inputs(0, 0.5, 1, 4, 5), 1).is_err());
    let free = MirrorGeometry::euclidean(FeasibleSet::unbounded(3));
    assert!(ProblemConstants::from_geometry(&free, 1.0, 0.0, 1.0).is_err());
    let ball = MirrorGeometry::euclidean(FeasibleSet::centered_ball(3, 2.0).unwrap());
    let pc = ProblemConstants::from_geometry(&ball, 1.0, 0.0, 1.0).unwrap();
    assert!((pc.d_omega - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn corollary_examples() {
    let c = ProblemConstants { sigma2: 1.0, ..unit() };
    let rep = corollary_conditions(&c, 16, 64, 0.5, 0.0, Variant::Dsamd, 0.1).unwrap();
    assert_eq!(rep.b_min, 2);
    let rep = corollary_conditions(&c, 16, 64, 1.0 / 3.0, 0.0, Variant::Adsamd, 0.1).unwrap();
    assert_eq!(rep.b_min, 3);
    for t in [32, 64, 256, 4096] {
        let d = corollary_conditions(&c, 16, t, 0.5, 0.4, Variant::Dsamd, 0.1).unwrap();
        let a = corollary_conditions(&c, 16, t, 0.5, 0.4, Variant::Adsamd, 0.1).unwrap();
        assert!(a.rho_min < d.rho_min, "T = {t}");
    }
    let single = corollary_conditions(&c, 1, 10, 0.5, 0.7, Variant::Dsamd, 0.1).unwrap();
    assert!(single.satisfied.batch && single.satisfied.rho);
    assert!(corollary_conditions(&c, 4, 10, 0.5, 1.0, Variant::Dsamd, 0.1).is_err());
}

mod bounds_basics {
    use dsamd_core::bounds::*;
    use dsamd_core::{Error, MirrorGeometry};

    fn unit() -> ProblemConstants {
        ProblemConstants { l: 1.0, m_lip: 0.0, sigma2: 1.0, alpha: 1.0, c_star: 1.0, d_omega: 1.0, omega_radius: 2f64.sqrt() }
    }

    fn inputs(lambda2: f64, s: usize) -> BoundInputs {
        BoundInputs { m: 2, lambda2, r: 2, b: 4, s, gamma: 0.1 }
    }

    #[test]
    fn perfect_mixing_kills_bias() {
        let c = unit();
        assert_eq!(xi_dsamd(&c, &inputs(0.0, 5), 5).unwrap(), 0.0);
        let c2 = ProblemConstants { m_lip: 0.3, ..c };
        assert!((xi_dsamd(&c2, &inputs(0.0, 5), 5).unwrap() - 0.6).abs() < 1e-15);
        let d2 = delta2_dsamd(&c, &inputs(0.0, 5), 5, MTerm::Squared).unwrap();
        assert!((d2 - 4.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn noiseless_accelerated_bound_is_deterministic() {
        let c = ProblemConstants { sigma2: 0.0, ..unit() };
        let g = gap_bound_adsamd(&c, &inputs(0.0, 10), MTerm::Squared).unwrap();
        assert_eq!(g.total, 8.0 / 100.0);
    }

    #[test]
    fn single_node_variance() {
        let c = ProblemConstants { m_lip: 0.2, ..unit() };
        let i = BoundInputs { m: 1, lambda2: 0.7, r: 0, b: 5, s: 3, gamma: 0.1 };
        let d2 = delta2_dsamd(&c, &i, 3, MTerm::Linear).unwrap();
        assert!((d2 - (4.0 / 5.0 + 4.0 * 0.2)).abs() < 1e-15);
    }

    #[test]
    fn growth_is_log_space_safe() {
        assert!(growth(1e-9, 1_000_000).is_finite());
        assert!((growth(0.5, 3) - (1.5f64.powi(3) - 1.0)).abs() < 1e-14);
        assert_eq!(growth(0.0, 10), 0.0);
    }

    #[test]
    fn unbounded_domain_is_rejected() {
        use dsamd_core::geometry::FeasibleSet;
        let g = MirrorGeometry::euclidean(FeasibleSet::unbounded(3));
        assert!(matches!(ProblemConstants::from_geometry(&g, 1.0, 0.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn corollary_degenerate_cases() {
        let c = unit();
        let r = corollary_conditions(&c, 8, 64, 0.5, 0.0, Variant::Dsamd, 1.0).unwrap();
        assert_eq!(r.b_min, 2);
        let one = corollary_conditions(&c, 1, 64, 0.5, 0.9, Variant::Adsamd, 1.0).unwrap();
        assert!(one.satisfied.batch && one.satisfied.rho);
        let d = corollary_conditions(&c, 8, 64, 0.5, 0.5, Variant::Dsamd, 1.0).unwrap();
        let a = corollary_conditions(&c, 8, 64, 0.5, 0.5, Variant::Adsamd, 1.0).unwrap();
        assert!(a.rho_min < d.rho_min);
    }
}
