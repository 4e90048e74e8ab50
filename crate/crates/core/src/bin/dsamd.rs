use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dsamd_core::bounds::{self, BoundInputs, ProblemConstants, Variant};
use dsamd_core::harness::{self, ExperimentConfig};
use dsamd_core::network::{generate_topology, MixingMatrix};
use dsamd_core::oracle::LogisticTask;
use dsamd_core::rng::{derive_seed, tags};
use dsamd_core::{make_schedule, AlgorithmKind, Result};

#[derive(Parser)]
#[command(name = "dsamd", version, about = "Distributed stochastic mirror descent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write traces, summary and plot columns.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Fit log-log slopes of final gap against mT from a trace CSV.
    Slope {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Print corollary conditions and theorem bounds for each m in a config.
    Bounds {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(config: PathBuf, out: PathBuf, seed: Option<u64>, jobs: Option<usize>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(seed) = seed {
        cfg.master_seed = seed;
    }
    let jobs = jobs.unwrap_or(0);
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| dsamd_core::Error::Config(format!("thread pool: {e}")))?;
    let result = pool.install(|| harness::run_sweep(&cfg))?;
    let written = harness::emit(&result, &out)?;
    for point in &result.points {
        for agg in &point.aggregates {
            println!("m={:<4} T={:<4} {:<14} gap {:.6e} +- {:.2e}", point.m, point.horizon, agg.algorithm, agg.mean_final_gap, agg.stderr);
        }
    }
    for spec in &cfg.algorithms {
        if let Some(slope) = result.slope(spec.kind) {
            println!("slope {:<14} {slope:.4}", spec.kind);
        }
    }
    println!("wrote {} files to {}", written.len(), out.display());
    Ok(())
}

fn slope(input: PathBuf) -> Result<()> {
    let rows = harness::read_trace_csv(&input)?;
    let slopes = harness::slopes_from_rows(&rows);
    if slopes.is_empty() {
        return Err(dsamd_core::Error::Data(format!("{} has no node-average rows", input.display())));
    }
    for (alg, s) in slopes {
        match s {
            Ok(v) => println!("{alg}\t{v:.6}"),
            Err(e) => println!("{alg}\tunavailable ({e})"),
        }
    }
    Ok(())
}

fn bounds_report(config: PathBuf) -> Result<()> {
    let cfg = ExperimentConfig::load(&config)?;
    let geometry = cfg.build_geometry()?;
    let c_mult = match cfg.b_rule {
        dsamd_core::BatchRule::Corollary { c_mult } => c_mult,
        dsamd_core::BatchRule::Explicit { .. } => 1.0,
    };
    for &m in &cfg.m_list {
        let horizon = cfg.regime.horizon(m);
        let seed = harness::sweep::instance_seed(cfg.master_seed, m, 0);
        let task = LogisticTask::generate(cfg.task.d, cfg.task.sigma_r2, cfg.task.label_prior, seed)?;
        let lambda2 = if m == 1 {
            0.0
        } else {
            let topo = generate_topology(cfg.graph, m, derive_seed(&[seed, tags::TOPOLOGY]))?;
            MixingMatrix::build(&topo, cfg.mixing_rule())?.lambda2()
        };
        let sigma2 = task.estimate_noise_variance(&vec![0.0; task.dimension()], cfg.noise_samples, derive_seed(&[seed, tags::NOISE_PROBE]));
        let constants = ProblemConstants::from_geometry(&geometry, task.smoothness_estimate(), cfg.nonsmooth_lipschitz, sigma2)?;
        let schedule = make_schedule(cfg.rho, horizon, cfg.b_rule, lambda2, m)?;
        println!("m={m} T={horizon} lambda2={lambda2:.6} L={:.4} sigma2={sigma2:.4}", constants.l);
        println!(
            "  schedule b={} r={} S={}{}",
            schedule.batch,
            schedule.consensus_rounds,
            schedule.rounds,
            if schedule.capped { " (capped at T)" } else { "" }
        );
        for variant in [Variant::Dsamd, Variant::Adsamd] {
            let rep = bounds::corollary_conditions(&constants, m, horizon, cfg.rho, lambda2, variant, c_mult)?;
            let kind = match variant {
                Variant::Dsamd => AlgorithmKind::Dsamd,
                Variant::Adsamd => AlgorithmKind::Adsamd,
            };
            let gamma = cfg.algorithms.iter().find(|a| a.kind == kind).map_or(1.0, |a| a.gamma);
            let inputs = BoundInputs { m, lambda2, r: schedule.consensus_rounds, b: schedule.batch, s: schedule.rounds, gamma };
            let bound = match variant {
                Variant::Dsamd => bounds::gap_bound_dsamd(&constants, &inputs, cfg.m_term)?,
                Variant::Adsamd => bounds::gap_bound_adsamd(&constants, &inputs, cfg.m_term)?,
            };
            println!(
                "  {variant:?}: b_min={} b_max={:.3} rho_min={:.4} T_min={:.3} M_max={:.4} satisfied={} bound={:.4e} gamma*={:.4e}",
                rep.b_min,
                rep.b_max,
                rep.rho_min,
                rep.t_min,
                rep.m_max,
                rep.satisfied.all(),
                bound.total,
                bound.gamma_star
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out, seed, jobs } => run(config, out, seed, jobs),
        Command::Slope { input } => slope(input),
        Command::Bounds { config } => bounds_report(config),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
