use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::harness::stats;
use crate::harness::sweep::SweepResult;
use crate::trace::AlgorithmKind;

/// One CSV row: a node's gap, or the node average when `node == "mean"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub algorithm: AlgorithmKind,
    pub m: usize,
    pub horizon: usize,
    pub instance: usize,
    pub instance_seed: u64,
    pub round: usize,
    pub samples_consumed: usize,
    pub node: String,
    pub gap: f64,
}

pub const MEAN_NODE: &str = "mean";

pub fn trace_file_name(kind: AlgorithmKind) -> String {
    format!("trace_{}.csv", kind.name())
}

/// Rows of every sweep point for `kind`, ordered by (m, instance, round).
pub fn trace_rows(result: &SweepResult, kind: AlgorithmKind) -> Vec<TraceRow> {
    let mut rows = Vec::new();
    for point in &result.points {
        for run in &point.instances {
            let Some(trace) = run.traces.iter().find(|t| t.algorithm == kind) else { continue };
            for rec in &trace.rounds {
                let row = |node: String, gap: f64| TraceRow {
                    algorithm: kind,
                    m: point.m,
                    horizon: point.horizon,
                    instance: run.instance,
                    instance_seed: run.seed,
                    round: rec.round,
                    samples_consumed: rec.samples_consumed,
                    node,
                    gap,
                };
                rows.push(row(MEAN_NODE.into(), rec.mean_gap));
                if let Some(gaps) = &rec.node_gaps {
                    rows.extend(gaps.iter().enumerate().map(|(i, g)| row(i.to_string(), *g)));
                }
            }
        }
    }
    rows
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv { path: path.to_path_buf(), source }
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_error(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error(path))?;
    r.deserialize().map(|row| row.map_err(csv_error(path))).collect()
}

/// Mean final gap per `(algorithm, m, T)` from the node-average rows at
/// each instance's last recorded round.
pub fn final_means(rows: &[TraceRow]) -> BTreeMap<(AlgorithmKind, usize, usize), f64> {
    let mut last: BTreeMap<(AlgorithmKind, usize, usize, usize), (usize, f64)> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.node == MEAN_NODE) {
        let entry = last.entry((row.algorithm, row.m, row.horizon, row.instance)).or_insert((row.round, row.gap));
        if row.round >= entry.0 {
            *entry = (row.round, row.gap);
        }
    }
    let mut grouped: BTreeMap<(AlgorithmKind, usize, usize), Vec<f64>> = BTreeMap::new();
    for ((alg, m, t, _), (_, gap)) in last {
        grouped.entry((alg, m, t)).or_default().push(gap);
    }
    grouped.into_iter().map(|(k, v)| (k, stats::mean(&v))).collect()
}

/// Fitted slope per algorithm over the sweep points found in `rows`.
pub fn slopes_from_rows(rows: &[TraceRow]) -> BTreeMap<AlgorithmKind, Result<f64>> {
    let mut points: BTreeMap<AlgorithmKind, Vec<(f64, f64)>> = BTreeMap::new();
    for ((alg, m, t), gap) in final_means(rows) {
        points.entry(alg).or_default().push(((m * t) as f64, gap));
    }
    points.into_iter().map(|(alg, pts)| (alg, stats::fit_slope(&pts))).collect()
}

fn summary(result: &SweepResult) -> serde_json::Value {
    let points: Vec<_> = result
        .points
        .iter()
        .map(|p| {
            let instances: Vec<_> = p
                .instances
                .iter()
                .map(|r| {
                    json!({
                        "instance": r.instance,
                        "seed": r.seed,
                        "lambda2": r.lambda2,
                        "rejected_draws": r.rejected_draws,
                        "schedule": r.schedule,
                        "meta": r.traces.iter().map(|t| json!({"algorithm": t.algorithm, "meta": t.meta})).collect::<Vec<_>>(),
                    })
                })
                .collect();
            json!({
                "m": p.m,
                "horizon": p.horizon,
                "aggregates": p.aggregates,
                "overlay": {
                    "reference": p.overlay.reference,
                    "smoothness": p.overlay.smoothness,
                    "sigma2": p.overlay.sigma2,
                    "lambda2_mean": p.overlay.lambda2_mean,
                    "dsamd_final": p.overlay.dsamd.last(),
                    "adsamd_final": p.overlay.adsamd.last(),
                },
                "instances": instances,
            })
        })
        .collect();
    let slopes: BTreeMap<String, Option<f64>> =
        result.config.algorithms.iter().map(|a| (a.kind.name().to_string(), result.slope(a.kind))).collect();
    json!({
        "config": result.config,
        "master_seed": result.config.master_seed,
        "runs": result.run_count(),
        "sweep_points": points,
        "slopes": slopes,
    })
}

fn gnuplot_columns(result: &SweepResult) -> String {
    let algs: Vec<AlgorithmKind> = result.config.algorithms.iter().map(|a| a.kind).collect();
    let mut out = String::from("# m T mT reference");
    for a in &algs {
        let _ = write!(out, " {0}_mean {0}_stderr", a.name());
    }
    out.push_str(" dsamd_bound adsamd_bound\n");
    for p in &result.points {
        let _ = write!(out, "{} {} {} {}", p.m, p.horizon, p.m * p.horizon, p.overlay.reference);
        for a in &algs {
            match p.aggregate(*a) {
                Some(agg) => {
                    let _ = write!(out, " {} {}", agg.mean_final_gap, agg.stderr);
                }
                None => out.push_str(" NaN NaN"),
            }
        }
        let last = |v: &[crate::bounds::GapBound]| v.last().map_or(f64::NAN, |b| b.total);
        let _ = writeln!(out, " {} {}", last(&p.overlay.dsamd), last(&p.overlay.adsamd));
    }
    out
}

#[derive(Serialize)]
struct BoundRow {
    m: usize,
    horizon: usize,
    s: usize,
    reference: f64,
    dsamd_bound: f64,
    adsamd_bound: f64,
    dsamd_gamma_star: f64,
    adsamd_gamma_star: f64,
}

fn write_file(path: PathBuf, contents: &[u8]) -> Result<PathBuf> {
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes per-algorithm traces, bounds, summary, plot columns and graphs.
/// Returns the written paths.
pub fn emit(result: &SweepResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let summary = serde_json::to_string_pretty(&summary(result))?;
    written.push(write_file(out_dir.join("summary.json"), summary.as_bytes())?);
    if result.points.is_empty() {
        return Ok(written);
    }
    for spec in &result.config.algorithms {
        let path = out_dir.join(trace_file_name(spec.kind));
        write_trace_csv(&path, &trace_rows(result, spec.kind))?;
        written.push(path);
    }
    let bounds_path = out_dir.join("bounds.csv");
    let mut w = csv::Writer::from_path(&bounds_path).map_err(csv_error(&bounds_path))?;
    for p in &result.points {
        for (k, (d, a)) in p.overlay.dsamd.iter().zip(&p.overlay.adsamd).enumerate() {
            let row = BoundRow {
                m: p.m,
                horizon: p.horizon,
                s: k + 1,
                reference: p.overlay.reference,
                dsamd_bound: d.total,
                adsamd_bound: a.total,
                dsamd_gamma_star: d.gamma_star,
                adsamd_gamma_star: a.gamma_star,
            };
            w.serialize(row).map_err(csv_error(&bounds_path))?;
        }
    }
    w.flush().map_err(|e| Error::io(&bounds_path, e))?;
    written.push(bounds_path);
    written.push(write_file(out_dir.join("sweep.dat"), gnuplot_columns(result).as_bytes())?);
    let graphs = out_dir.join("graphs");
    std::fs::create_dir_all(&graphs).map_err(|e| Error::io(&graphs, e))?;
    for p in &result.points {
        let mut text = String::new();
        for r in &p.instances {
            let _ = writeln!(text, "# instance {} seed {} lambda2 {}", r.instance, r.seed, r.lambda2);
            text.push_str(&r.edge_list);
        }
        written.push(write_file(graphs.join(format!("m{}.edges", p.m)), text.as_bytes())?);
    }
    Ok(written)
}
