mod support;

use dsamd_core::algorithms::{consensus_budget, dgd_period};
use dsamd_core::{
    generate_topology, make_schedule, run_adsamd, run_baseline, run_dsamd, AlgorithmKind, BatchRule, FeasibleSet, GraphFamily,
    MirrorGeometry, MixingMatrix, MixingRule, Problem, RateSchedule, RunOptions,
};
use support::{deviation_from_central, full_options, node_spread, problem};

fn complete(m: usize) -> MixingMatrix {
    MixingMatrix::build(&generate_topology(GraphFamily::Complete, m, 0).unwrap(), MixingRule::MeanForComplete).unwrap()
}

fn expander(m: usize, seed: u64) -> MixingMatrix {
    MixingMatrix::build(&generate_topology(GraphFamily::KRegular { k: 4 }, m, seed).unwrap(), MixingRule::Metropolis).unwrap()
}

#[test]
fn schedule_examples() {
    let s = make_schedule(0.5, 64, BatchRule::Explicit { b: 2 }, 0.3, 8).unwrap();
    assert_eq!((s.batch, s.consensus_rounds, s.rounds), (2, 1, 32));
    let s = make_schedule(0.5, 16, BatchRule::Corollary { c_mult: 0.1 }, 2.0 / 3.0, 16).unwrap();
    assert_eq!((s.batch, s.consensus_rounds), (3, 1));
    let s = make_schedule(1.0, 10, BatchRule::Explicit { b: 1 }, 0.3, 8).unwrap();
    assert_eq!((s.batch, s.consensus_rounds, s.rounds), (1, 1, 10));
    let s = make_schedule(0.5, 7, BatchRule::Explicit { b: 2 }, 0.3, 8).unwrap();
    assert_eq!((s.rounds, s.leftover()), (3, 1));
    assert!(make_schedule(0.5, 1, BatchRule::Explicit { b: 2 }, 0.3, 8).is_err());
    assert!(RateSchedule::new(0.5, 8, 2, 2, 4).is_err());
    assert_eq!(consensus_budget(3, 0.5), 1);
    assert_eq!(dgd_period(0.5), 2);
    assert_eq!(dgd_period(1.0), 1);
}

#[test]
fn single_node_matches_central_mini_batch() {
    let p = problem(4, 11);
    let schedule = RateSchedule::new(0.5, 300, 3, 0, 1).unwrap();
    assert_eq!(schedule.rounds, 100);
    let w = MixingMatrix::trivial();
    assert_eq!(deviation_from_central(&p, &w, &schedule, AlgorithmKind::Dsamd, 0.5), 0.0);
    assert_eq!(deviation_from_central(&p, &w, &schedule, AlgorithmKind::Adsamd, 0.05), 0.0);
}

#[test]
fn exact_averaging_makes_nodes_agree() {
    let p = problem(4, 12);
    let w = complete(4);
    let schedule = RateSchedule::new(0.5, 200, 2, 1, 4).unwrap();
    for (kind, gamma) in [(AlgorithmKind::Dsamd, 5.0), (AlgorithmKind::Adsamd, 0.5)] {
        assert!(node_spread(&p, &w, &schedule, kind, gamma) <= 1e-9, "{kind}");
        let dev = deviation_from_central(&p, &w, &schedule, kind, gamma);
        assert!(dev <= 1e-9, "{kind}: {dev}");
    }
}

#[test]
fn zero_step_never_moves() {
    let p = problem(3, 13);
    let w = expander(10, 1);
    let schedule = RateSchedule::new(0.5, 40, 4, 2, 10).unwrap();
    let start = p.geometry.initial_point().unwrap();
    for kind in [AlgorithmKind::Dsamd, AlgorithmKind::Adsamd, AlgorithmKind::DgdNaive, AlgorithmKind::LocalMd] {
        let trace = run_baseline(kind, &p, Some(&w), &schedule, 0.0, &full_options()).unwrap();
        for rec in &trace.rounds {
            assert!(rec.search_points.as_ref().unwrap().iter().all(|x| *x == start), "{kind}");
        }
    }
}

#[test]
fn first_accelerated_round_reports_the_search_point() {
    let p = problem(3, 14);
    let w = expander(10, 2);
    let schedule = RateSchedule::new(0.5, 40, 4, 2, 10).unwrap();
    let trace = run_adsamd(&p, &w, &schedule, 0.3, &full_options()).unwrap();
    let first = &trace.rounds[0];
    assert_eq!(first.round, 1);
    assert_eq!(first.search_points, first.reported_points);
    assert_ne!(trace.rounds[1].search_points, trace.rounds[1].reported_points);
}

#[test]
fn iterates_stay_feasible() {
    let mut p = problem(3, 15);
    let domain = FeasibleSet::centered_ball(4, 0.3).unwrap();
    p.geometry = MirrorGeometry::euclidean(domain.clone());
    p.truth.prepare(&domain).unwrap();
    let w = expander(8, 3);
    let schedule = RateSchedule::new(0.5, 60, 2, 1, 8).unwrap();
    for kind in AlgorithmKind::ALL {
        let trace = run_baseline(kind, &p, Some(&w), &schedule, 20.0, &full_options()).unwrap();
        for rec in &trace.rounds {
            for x in rec.search_points.as_ref().unwrap().iter().chain(rec.reported_points.as_ref().unwrap()) {
                assert!(domain.contains(x), "{kind} left the domain");
            }
        }
    }
}

#[test]
fn schedule_accounting() {
    let p = problem(3, 16);
    let w = expander(12, 4);
    let schedule = RateSchedule::new(0.75, 50, 4, 3, 12).unwrap();
    for trace in [
        run_dsamd(&p, &w, &schedule, 1.0, &RunOptions::default()).unwrap(),
        run_adsamd(&p, &w, &schedule, 0.1, &RunOptions::default()).unwrap(),
    ] {
        assert_eq!(trace.meta.prox_steps, 12);
        assert_eq!(trace.meta.consensus_rounds_per_step, 3);
        assert!(trace.meta.consensus_rounds_per_step <= consensus_budget(4, 0.75));
        assert_eq!(trace.meta.consensus_rounds_total, 36);
        assert_eq!(trace.meta.discarded_samples, 2);
        assert_eq!(trace.rounds.len(), 12);
        assert_eq!(trace.rounds.last().unwrap().samples_consumed, 12 * 48);
    }
}

#[test]
fn dgd_variants() {
    let p = problem(3, 17);
    let w = expander(8, 5);
    let full = RateSchedule::new(1.0, 20, 1, 1, 8).unwrap();
    let naive = run_baseline(AlgorithmKind::DgdNaive, &p, Some(&w), &full, 1.0, &RunOptions::default()).unwrap();
    assert_eq!((naive.meta.prox_steps, naive.meta.discarded_samples), (20, 0));
    let half = RateSchedule::new(0.5, 20, 2, 1, 8).unwrap();
    let mb = run_baseline(AlgorithmKind::DgdMinibatch, &p, Some(&w), &half, 1.0, &RunOptions::default()).unwrap();
    assert_eq!((mb.meta.prox_steps, mb.meta.batch_size), (10, 2));
    let naive = run_baseline(AlgorithmKind::DgdNaive, &p, Some(&w), &half, 1.0, &RunOptions::default()).unwrap();
    assert_eq!((naive.meta.prox_steps, naive.meta.discarded_samples), (10, 10));
}

#[test]
fn configuration_errors() {
    let p = problem(3, 18);
    let schedule = RateSchedule::new(0.5, 20, 2, 1, 8).unwrap();
    assert!(run_baseline(AlgorithmKind::DgdNaive, &p, None, &schedule, 1.0, &RunOptions::default()).is_err());
    assert!(run_dsamd(&p, &complete(4), &schedule, 1.0, &RunOptions::default()).is_err());
    assert!(run_dsamd(&p, &expander(8, 0), &schedule, f64::NAN, &RunOptions::default()).is_err());
    let wrong = Problem { geometry: MirrorGeometry::euclidean(FeasibleSet::centered_ball(7, 1.0).unwrap()), ..problem(3, 18) };
    assert!(run_dsamd(&wrong, &expander(8, 0), &schedule, 1.0, &RunOptions::default()).is_err());
}

#[test]
fn runs_are_deterministic_and_recording_is_thinned() {
    let p = problem(3, 19);
    let w = expander(8, 6);
    let schedule = RateSchedule::new(0.5, 40, 2, 1, 8).unwrap();
    let a = run_dsamd(&p, &w, &schedule, 1.0, &RunOptions::default()).unwrap();
    let b = run_dsamd(&p, &w, &schedule, 1.0, &RunOptions::default()).unwrap();
    assert_eq!(a, b);
    let sparse = run_dsamd(&p, &w, &schedule, 1.0, &RunOptions { eval_every: 0, ..RunOptions::default() }).unwrap();
    assert_eq!(sparse.rounds.len(), 1);
    assert_eq!(sparse.final_node_gaps, a.final_node_gaps);
    let every = run_dsamd(&p, &w, &schedule, 1.0, &RunOptions { eval_every: 7, ..RunOptions::default() }).unwrap();
    let rounds: Vec<usize> = every.rounds.iter().map(|r| r.round).collect();
    assert_eq!(rounds, vec![7, 14, 20]);
}

#[test]
fn step_clipping() {
    let p = problem(3, 20);
    let w = expander(8, 7);
    let schedule = RateSchedule::new(0.5, 20, 2, 1, 8).unwrap();
    let l = p.task.smoothness_estimate();
    let opts = RunOptions { smoothness: Some(l), ..RunOptions::default() };
    let raw = run_adsamd(&p, &w, &schedule, 20.0, &opts).unwrap();
    assert!(raw.meta.step_exceeds_limit);
    let clipped = run_adsamd(&p, &w, &schedule, 20.0, &RunOptions { clip_to_smoothness: true, ..opts }).unwrap();
    assert!((clipped.meta.step_size - 1.0 / (2.0 * l)).abs() < 1e-15);
    assert!(!clipped.meta.step_exceeds_limit);
}

#[test]
fn central_beats_local_on_average() {
    let w = complete(8);
    let schedule = make_schedule(0.5, 16, BatchRule::Explicit { b: 2 }, 0.0, 8).unwrap();
    let (mut central, mut local) = (0.0, 0.0);
    for i in 0..100 {
        let p = problem(4, 1000 + i);
        central += run_baseline(AlgorithmKind::CentralMd, &p, None, &schedule, 0.5, &RunOptions::default()).unwrap().final_mean_gap();
        local += run_baseline(AlgorithmKind::LocalMd, &p, Some(&w), &schedule, 0.5, &RunOptions::default()).unwrap().final_mean_gap();
    }
    assert!(central < local, "{central} vs {local}");
}

mod algorithms_basics {
    use dsamd_core::algorithms::*;
    use dsamd_core::Error;

    #[test]
    fn explicit_schedule_examples() {
        let s = make_schedule(0.5, 16, BatchRule::Explicit { b: 2 }, 0.0, 4).unwrap();
        assert_eq!((s.consensus_rounds, s.rounds), (1, 8));
        let s = make_schedule(1.0, 10, BatchRule::Explicit { b: 1 }, 0.3, 4).unwrap();
        assert_eq!((s.consensus_rounds, s.rounds), (1, 10));
    }

    #[test]
    fn corollary_schedule_example() {
        let s = make_schedule(0.5, 16, BatchRule::Corollary { c_mult: 0.1 }, 2.0 / 3.0, 16).unwrap();
        assert_eq!((s.batch, s.consensus_rounds), (3, 1));
        assert_eq!(s.rounds, 5);
        assert_eq!(s.leftover(), 1);
    }

    #[test]
    fn perfect_mixing_fits_one_round() {
        let s = make_schedule(0.25, 40, BatchRule::Corollary { c_mult: 0.1 }, 0.0, 8).unwrap();
        assert_eq!((s.batch, s.consensus_rounds), (4, 1));
    }

    #[test]
    fn schedule_errors() {
        assert!(matches!(make_schedule(0.5, 3, BatchRule::Explicit { b: 4 }, 0.0, 2), Err(Error::Schedule(_))));
        assert!(RateSchedule::new(0.5, 10, 2, 2, 4).is_err());
        assert!(make_schedule(0.5, 10, BatchRule::Explicit { b: 2 }, 1.0, 2).is_err());
    }

    #[test]
    fn corollary_rule_caps_at_horizon() {
        let s = make_schedule(0.5, 3, BatchRule::Corollary { c_mult: 0.1 }, 0.9, 8).unwrap();
        assert!(s.capped);
        assert_eq!((s.batch, s.rounds), (3, 1));
    }

    #[test]
    fn corollary_rule_keeps_one_consensus_round() {
        let s = make_schedule(0.5, 64, BatchRule::Corollary { c_mult: 0.1 }, 0.143, 8).unwrap();
        assert_eq!((s.batch, s.consensus_rounds), (2, 1));
    }

    #[test]
    fn dgd_periods() {
        assert_eq!(dgd_period(1.0), 1);
        assert_eq!(dgd_period(0.5), 2);
        assert_eq!(dgd_period(0.3), 4);
        assert_eq!(dgd_period(3.0), 1);
    }
}
