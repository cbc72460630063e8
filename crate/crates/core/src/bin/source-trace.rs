use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use source_trace::error::{Error, Result};
use source_trace::evaluation::{local_regret, offline_oracle, RegretStep};
use source_trace::io::bench::{curve_lengths, cumulative_loss, default_bench, run_bench};
use source_trace::io::{
    generate_synthetic, gnuplot, load_observations, load_trace, manifest_hash, write_observations, write_trace,
    ExperimentConfig, TraceFile,
};
use source_trace::optimizers::{run, Algorithm};
use source_trace::planning::plan_sensors;

#[derive(Parser)]
#[command(name = "source-trace", version, about = "Online identification of instantaneous river pollution sources")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic observation stream.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one optimizer online over an observation file.
    Identify {
        #[arg(long)]
        algo: Algorithm,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Also write a gnuplot script next to the trace.
        #[arg(long)]
        emit_gnuplot: bool,
    },
    /// Local and cumulative regret curves of a trace.
    Regret {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Grid points per axis of the offline oracle.
        #[arg(long)]
        oracle_grid: Option<usize>,
        #[arg(long)]
        emit_gnuplot: bool,
    },
    /// Sequential sensor-installation schedule over per-sensor files.
    PlanSensors {
        #[arg(long)]
        config: PathBuf,
        /// Directory of per-sensor observation files (`*.csv`, name order).
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// The full replication suite.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        emit_gnuplot: bool,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_json(&read(path)?)?;
    if let Ok(v) = std::env::var("SOURCE_TRACE_SEED") {
        let seed = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("SOURCE_TRACE_SEED `{v}` is not an unsigned integer")))?;
        cfg.override_seed(seed);
    }
    Ok(cfg)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("SOURCE_TRACE_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::Config(format!("SOURCE_TRACE_THREADS `{v}` is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn gnuplot_path(csv: &Path) -> PathBuf {
    csv.with_extension("gp")
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn execute(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = load_config(&config)?;
            let obs = generate_synthetic(&cfg.scenario)?;
            let manifest = manifest_hash(&cfg, &[]);
            write(&out, &write_observations(&obs, Some(&manifest)))
        }
        Command::Identify {
            algo,
            config,
            data,
            trace,
            emit_gnuplot,
        } => {
            let cfg = load_config(&config)?;
            let text = read(&data)?;
            let obs = load_observations(&text)?;
            let t = run(algo, &obs, &cfg.scenario.feasible_box, &cfg.scenario.river, &cfg.run)?;
            let manifest = manifest_hash(&cfg, text.as_bytes());
            write(&trace, &write_trace(&TraceFile::from_trace(&t, Some(manifest))))?;
            if emit_gnuplot {
                write(&gnuplot_path(&trace), &gnuplot::trace_script(&file_name(&trace), &algo.to_string()))?;
            }
            Ok(())
        }
        Command::Regret {
            trace,
            data,
            config,
            out,
            oracle_grid,
            emit_gnuplot,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(k) = oracle_grid {
                if k < 2 {
                    return Err(Error::Config("--oracle-grid needs at least 2 points per axis".into()));
                }
                cfg.oracle.grid = k;
            }
            let data_text = read(&data)?;
            let obs = load_observations(&data_text)?;
            let tf = load_trace(&read(&trace)?)?;
            if tf.rows.len() > obs.len() {
                return Err(Error::Parse {
                    line: 1,
                    column: 1,
                    message: format!("trace has {} rows but the data only {} observations", tf.rows.len(), obs.len()),
                });
            }
            let t = tf.to_run_trace(Algorithm::Atgd, cfg.run.clone());
            let (b, p) = (&cfg.scenario.feasible_box, &cfg.scenario.river);
            let stream = &obs[..t.len()];
            let local = local_regret(&t, stream, cfg.run.window, p, b, RegretStep::Accepted)?;
            let step = cfg.bench.as_ref().map_or_else(|| default_bench(t.len()).curve_step, |b| b.curve_step);
            let manifest = manifest_hash(&cfg, data_text.as_bytes());
            let mut csv = format!("# manifest {manifest}\nn,cumulative_loss,oracle,cumulative_regret,local_regret\n");
            for m in curve_lengths(t.len(), step) {
                let oracle = offline_oracle(&stream[..m], b, p, &cfg.oracle)?;
                let loss = cumulative_loss(&t, stream, p, m)?;
                let local_m: f64 = local.per_iteration[..m].iter().sum();
                let _ = writeln!(csv, "{m},{loss},{},{},{local_m}", oracle.value, loss - oracle.value);
            }
            write(&out, &csv)?;
            if emit_gnuplot {
                let name = file_name(&out);
                let script = gnuplot::script(&name, "regret", (1, "n"), &[(4, "cumulative"), (5, "local")], false);
                write(&gnuplot_path(&out), &script)?;
            }
            Ok(())
        }
        Command::PlanSensors { config, data_dir, out } => {
            let cfg = load_config(&config)?;
            let plan = cfg
                .plan
                .clone()
                .ok_or_else(|| Error::Config("the configuration has no `plan` section".into()))?;
            let mut files: Vec<PathBuf> = std::fs::read_dir(&data_dir)
                .map_err(|e| Error::Io(format!("{}: {e}", data_dir.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            files.sort();
            let mut all = String::new();
            let mut streams = Vec::with_capacity(files.len());
            for f in &files {
                let text = read(f)?;
                streams.push(load_observations(&text).map_err(|e| match e {
                    Error::Parse { line, column, message } => Error::Parse {
                        line,
                        column,
                        message: format!("{}: {message}", f.display()),
                    },
                    other => other,
                })?);
                all.push_str(&text);
            }
            let run_cfg = cfg.run.clone();
            let runner = |s: &[_], b: &_, p: &_| run(plan.algorithm, s, b, p, &run_cfg).map(|t| t.final_estimate);
            let schedule = plan_sensors(&streams, &cfg.scenario.feasible_box, &cfg.scenario.river, runner, &plan.planner)?;
            let manifest = manifest_hash(&cfg, all.as_bytes());
            let mut csv = format!(
                "# manifest {manifest}\nround,installed,required,raw_required,pool_exhausted,min_r_s,min_r_l,min_r_t\n"
            );
            for r in &schedule.rounds {
                let mins: Vec<String> = r
                    .records
                    .iter()
                    .map(|v| v.iter().min().map_or(String::new(), |m| m.to_string()))
                    .collect();
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    r.round,
                    r.installed,
                    r.required,
                    r.raw_required,
                    r.pool_exhausted,
                    mins.join(",")
                );
            }
            let _ = writeln!(csv, "# converged {}", schedule.converged);
            write(&out, &csv)
        }
        Command::Bench {
            config,
            out_dir,
            emit_gnuplot,
        } => {
            let mut cfg = load_config(&config)?;
            if emit_gnuplot {
                let mut b = cfg.bench.take().unwrap_or_default();
                b.emit_gnuplot = true;
                cfg.bench = Some(b);
            }
            run_bench(&cfg)?.write_to(&out_dir)
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::ElapsedTimeNonPositive { .. } => "elapsed_time_non_positive",
        Error::InvalidParameter(_) => "invalid_parameter",
        Error::DegenerateAxis { .. } => "degenerate_axis",
        Error::LineSearchStalled { .. } => "line_search_stalled",
        Error::NonFiniteIterate { .. } => "non_finite_iterate",
        Error::EpochBudgetExceeded { .. } => "epoch_budget_exceeded",
        Error::Path { source, .. } => error_kind(source),
        Error::AsymmetricInput { .. } => "asymmetric_input",
        Error::NotLocallyConvex { .. } => "not_locally_convex",
        Error::TooFewSamples(_) => "too_few_samples",
        Error::PoolExhausted { .. } => "pool_exhausted",
        Error::Parse { .. } => "parse",
        Error::Config(_) => "config",
        Error::Io(_) => "io",
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}] exit={}: {msg}", error_kind(&e), e.exit_code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
