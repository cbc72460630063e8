//! The replication suite: regret curves for each variant and a sweep over
//! the number of multi-start paths, written as a deterministic file tree.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::ade::{self, Observation, RiverParams, SourceEstimate};
use crate::error::{Error, Result};
use crate::evaluation::{local_regret, offline_oracle, OracleResult, RegretStep};
use crate::io::config::{manifest_hash, BenchConfig, ExperimentConfig};
use crate::io::csv::{write_observations, write_trace, TraceFile};
use crate::io::gnuplot;
use crate::io::scenario::generate_synthetic;
use crate::linalg::Vec3;
use crate::optimizers::{run, Algorithm, RunConfig, RunTrace};

/// Relative error of `x` against the planted source, per coordinate.
pub fn relative_error(x: &Vec3, truth: &SourceEstimate) -> Vec3 {
    let t = truth.to_array();
    std::array::from_fn(|k| ((x[k] - t[k]) / t[k]).abs())
}

/// Prefix lengths `step, 2·step, …` ending exactly at `n`.
pub fn curve_lengths(n: usize, step: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (1..=n / step).map(|k| k * step).collect();
    if v.last() != Some(&n) && n > 0 {
        v.push(n);
    }
    v
}

/// Cumulative loss of the played points over the first `n` observations.
pub fn cumulative_loss(trace: &RunTrace, stream: &[Observation], p: &RiverParams, n: usize) -> Result<f64> {
    let mut total = 0.0;
    for (r, o) in trace.records.iter().zip(stream).take(n) {
        total += ade::loss(&SourceEstimate::from_array(r.x), o, p)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Serialize)]
struct AlgorithmSummary {
    algorithm: Algorithm,
    paths: usize,
    final_estimate: Vec3,
    relative_error: Vec3,
    cumulative_loss: f64,
    cumulative_regret: f64,
    local_regret: f64,
    inner_steps: u64,
    grad_calls: u64,
    perturbations: u64,
    exhausted_epochs: u64,
}

#[derive(Debug, Clone, Serialize)]
struct BenchSummary {
    manifest: String,
    samples: usize,
    oracle: OracleResult,
    algorithms: Vec<AlgorithmSummary>,
    sweep: Vec<AlgorithmSummary>,
}

/// Every file of a bench run, by relative path, in write order.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchTree {
    pub manifest: String,
    pub files: Vec<(String, String)>,
}

impl BenchTree {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, content) in &self.files {
            std::fs::write(dir.join(name), content)?;
        }
        Ok(())
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }
}

fn summarize(
    trace: &RunTrace,
    stream: &[Observation],
    cfg: &ExperimentConfig,
    oracle: &OracleResult,
) -> Result<AlgorithmSummary> {
    let p = &cfg.scenario.river;
    let loss = cumulative_loss(trace, stream, p, stream.len())?;
    let local = local_regret(
        trace,
        stream,
        trace.config.window,
        p,
        &cfg.scenario.feasible_box,
        RegretStep::Accepted,
    )?;
    Ok(AlgorithmSummary {
        algorithm: trace.algorithm,
        paths: trace.paths,
        final_estimate: trace.final_estimate,
        relative_error: relative_error(&trace.final_estimate, &cfg.scenario.truth),
        cumulative_loss: loss,
        cumulative_regret: loss - oracle.value,
        local_regret: local.total,
        inner_steps: trace.total_inner_steps(),
        grad_calls: trace.total_grad_calls(),
        perturbations: trace.records.iter().map(|r| u64::from(r.perturbations)).sum(),
        exhausted_epochs: trace.records.iter().map(|r| u64::from(r.exhausted)).sum(),
    })
}

fn run_timed(algo: Algorithm, stream: &[Observation], cfg: &ExperimentConfig, run_cfg: &RunConfig) -> Result<RunTrace> {
    let clock = Instant::now();
    let trace = run(algo, stream, &cfg.scenario.feasible_box, &cfg.scenario.river, run_cfg)?;
    log::info!(
        "{algo} (I = {}) finished {} iterations in {:.2}s",
        trace.paths,
        trace.len(),
        clock.elapsed().as_secs_f64()
    );
    Ok(trace)
}

/// Runs the suite described by `cfg` (its `bench` section, or defaults).
pub fn run_bench(cfg: &ExperimentConfig) -> Result<BenchTree> {
    cfg.validate()?;
    let bench = cfg.bench.clone().unwrap_or_default();
    let stream = generate_synthetic(&cfg.scenario)?;
    let data = write_observations(&stream, None);
    let manifest = manifest_hash(cfg, data.as_bytes());
    let b = &cfg.scenario.feasible_box;
    let p = &cfg.scenario.river;
    let n = stream.len();

    let mut files = vec![
        ("config.json".to_string(), cfg.to_json() + "\n"),
        ("data.csv".to_string(), write_observations(&stream, Some(&manifest))),
    ];

    let lengths = curve_lengths(n, bench.curve_step);
    let oracles: Vec<OracleResult> = lengths
        .iter()
        .map(|&m| offline_oracle(&stream[..m], b, p, &cfg.oracle))
        .collect::<Result<_>>()?;
    let oracle = *oracles.last().ok_or_else(|| Error::Config("bench needs a nonempty stream".into()))?;

    // Regret curves.
    let mut traces = Vec::new();
    for &algo in &bench.algorithms {
        let trace = run_timed(algo, &stream, cfg, &cfg.run)?;
        files.push((
            format!("trace_{algo}.csv"),
            write_trace(&TraceFile::from_trace(&trace, Some(manifest.clone()))),
        ));
        traces.push(trace);
    }
    let mut curves = format!("# manifest {manifest}\nn,oracle");
    for t in &traces {
        let _ = write!(curves, ",cumulative_regret_{0},local_regret_{0}", t.algorithm);
    }
    curves.push('\n');
    let mut per_algo = Vec::new();
    for t in &traces {
        let local = local_regret(t, &stream, t.config.window, p, b, RegretStep::Accepted)?;
        let mut played = Vec::with_capacity(n);
        let mut acc = 0.0;
        for (r, o) in t.records.iter().zip(&stream) {
            acc += ade::loss(&SourceEstimate::from_array(r.x), o, p)?;
            played.push(acc);
        }
        let mut local_acc = Vec::with_capacity(n);
        let mut la = 0.0;
        for v in &local.per_iteration {
            la += v;
            local_acc.push(la);
        }
        per_algo.push((played, local_acc));
    }
    for (k, &m) in lengths.iter().enumerate() {
        let _ = write!(curves, "{m},{}", oracles[k].value);
        for (played, local_acc) in &per_algo {
            let _ = write!(curves, ",{},{}", played[m - 1] - oracles[k].value, local_acc[m - 1]);
        }
        curves.push('\n');
    }
    files.push(("regret.csv".to_string(), curves));

    let summaries: Vec<AlgorithmSummary> = traces
        .iter()
        .map(|t| summarize(t, &stream, cfg, &oracle))
        .collect::<Result<_>>()?;

    // Sweep over the number of paths.
    let mut sweep = Vec::new();
    for &algo in &bench.sweep_algorithms {
        if !algo.is_multistart() {
            return Err(Error::Config(format!("{algo} is not a multi-start variant")));
        }
        for &paths in &bench.sweep {
            let run_cfg = RunConfig {
                multi_start: paths,
                ..cfg.run.clone()
            };
            let trace = run_timed(algo, &stream, cfg, &run_cfg)?;
            sweep.push(summarize(&trace, &stream, cfg, &oracle)?);
        }
    }
    let mut sweep_csv = format!(
        "# manifest {manifest}\nalgorithm,paths,s,l,t,rel_err_s,rel_err_l,rel_err_t,cumulative_regret,local_regret,inner_steps,grad_calls\n"
    );
    for s in &sweep {
        let _ = writeln!(
            sweep_csv,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            s.algorithm,
            s.paths,
            s.final_estimate[0],
            s.final_estimate[1],
            s.final_estimate[2],
            s.relative_error[0],
            s.relative_error[1],
            s.relative_error[2],
            s.cumulative_regret,
            s.local_regret,
            s.inner_steps,
            s.grad_calls
        );
    }
    files.push(("sweep.csv".to_string(), sweep_csv));

    let summary = BenchSummary {
        manifest: manifest.clone(),
        samples: n,
        oracle,
        algorithms: summaries,
        sweep,
    };
    files.push((
        "summary.json".to_string(),
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    ));

    if bench.emit_gnuplot {
        for t in &traces {
            let name = format!("trace_{}.csv", t.algorithm);
            files.push((format!("trace_{}.gp", t.algorithm), gnuplot::trace_script(&name, &t.algorithm.to_string())));
        }
        let cols: Vec<(usize, String)> = traces
            .iter()
            .enumerate()
            .map(|(i, t)| (3 + 2 * i, t.algorithm.to_string()))
            .collect();
        let ys: Vec<(usize, &str)> = cols.iter().map(|(c, l)| (*c, l.as_str())).collect();
        files.push((
            "regret.gp".to_string(),
            gnuplot::script("regret.csv", "cumulative regret", (1, "n"), &ys, false),
        ));
    }
    Ok(BenchTree { manifest, files })
}

/// Default suite settings for `n` samples.
pub fn default_bench(n: usize) -> BenchConfig {
    BenchConfig {
        curve_step: (n / 10).max(1),
        ..BenchConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_lengths_end_at_n() {
        assert_eq!(curve_lengths(10, 5), vec![5, 10]);
        assert_eq!(curve_lengths(12, 5), vec![5, 10, 12]);
        assert_eq!(curve_lengths(3, 5), vec![3]);
        assert!(curve_lengths(0, 5).is_empty());
    }

    #[test]
    fn relative_error_per_coordinate() {
        let truth = SourceEstimate::new(1000.0, -20000.0, -200.0);
        let e = relative_error(&[1100.0, -19000.0, -200.0], &truth);
        assert!((e[0] - 0.1).abs() < 1e-12 && (e[1] - 0.05).abs() < 1e-12 && e[2] == 0.0);
    }
}
