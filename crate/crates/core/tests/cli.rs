use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use source_trace::io::{load_observations, load_trace, ExperimentConfig, NoiseModel, ScenarioConfig};
use source_trace::optimizers::RunConfig;

fn small_config(samples: usize) -> ExperimentConfig {
    let mut scenario = ScenarioConfig::truckee(samples).with_noise(NoiseModel::Relative { fraction: 0.01 });
    scenario.river = scenario.river.with_unit_factor(10.0);
    ExperimentConfig {
        scenario,
        run: RunConfig {
            tolerance: 1e-3,
            ..Default::default()
        },
        oracle: Default::default(),
        plan: None,
        bench: None,
    }
}

fn cli(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_source-trace"));
    for a in args {
        c.arg(a);
    }
    c.env_remove("SOURCE_TRACE_SEED").env_remove("SOURCE_TRACE_THREADS");
    c
}

fn ok(mut c: Command) -> Output {
    let out = c.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    path
}

#[test]
fn simulate_identify_regret_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config(30));
    let data = dir.path().join("data.csv");
    let trace = dir.path().join("trace.csv");
    let regret = dir.path().join("regret.csv");

    ok(cli(&[&"simulate", &"--config", &config, &"--out", &data]));
    let text = std::fs::read_to_string(&data).unwrap();
    assert!(text.starts_with("# manifest "));
    assert_eq!(load_observations(&text).unwrap().len(), 30);

    ok(cli(&[
        &"identify", &"--algo", &"atgd", &"--config", &config, &"--data", &data, &"--trace", &trace, &"--emit-gnuplot",
    ]));
    let tf = load_trace(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(tf.rows.len(), 30);
    assert!(tf.manifest.is_some());
    assert!(dir.path().join("trace.gp").exists());

    ok(cli(&[
        &"regret", &"--trace", &trace, &"--data", &data, &"--config", &config, &"--out", &regret, &"--oracle-grid", &"5",
    ]));
    let curves = std::fs::read_to_string(&regret).unwrap();
    let mut lines = curves.lines().skip(1);
    assert_eq!(lines.next(), Some("n,cumulative_loss,oracle,cumulative_regret,local_regret"));
    let last = curves.lines().last().unwrap();
    assert!(last.starts_with("30,"), "{last}");
}

#[test]
fn identify_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config(20));
    let data = dir.path().join("data.csv");
    ok(cli(&[&"simulate", &"--config", &config, &"--out", &data]));
    let run = |name: &str| {
        let t = dir.path().join(name);
        ok(cli(&[&"identify", &"--algo", &"mptgd", &"--config", &config, &"--data", &data, &"--trace", &t]));
        std::fs::read(t).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

#[test]
fn seed_override_changes_noise() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config(10));
    let sim = |seed: Option<&str>, name: &str| {
        let out = dir.path().join(name);
        let mut c = cli(&[&"simulate", &"--config", &config, &"--out", &out]);
        if let Some(s) = seed {
            c.env("SOURCE_TRACE_SEED", s);
        }
        ok(c);
        load_observations(&std::fs::read_to_string(out).unwrap()).unwrap()
    };
    let base = sim(None, "a.csv");
    assert_eq!(base, sim(Some("0"), "b.csv"));
    assert_ne!(base, sim(Some("5"), "c.csv"));
}

fn fails_with(mut c: Command, code: i32, kind: &str) {
    let out = c.output().unwrap();
    assert_eq!(out.status.code(), Some(code), "{}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(kind), "{err}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config(10));
    let data = dir.path().join("data.csv");
    let out = dir.path().join("out.csv");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"scenario": {}, "surprise": 1}"#).unwrap();
    fails_with(cli(&[&"simulate", &"--config", &bad, &"--out", &out]), 2, "error[config]");

    let mut c = cli(&[&"simulate", &"--config", &config, &"--out", &out]);
    c.env("SOURCE_TRACE_SEED", "minus one");
    fails_with(c, 2, "SOURCE_TRACE_SEED");

    std::fs::write(&data, "sensor_id,location_m,time_min,concentration\n0,0.0,oops,1.0\n").unwrap();
    fails_with(
        cli(&[&"identify", &"--algo", &"tgd", &"--config", &config, &"--data", &data, &"--trace", &out]),
        3,
        "error[parse]",
    );

    let missing = dir.path().join("missing.csv");
    fails_with(
        cli(&[&"identify", &"--algo", &"tgd", &"--config", &config, &"--data", &missing, &"--trace", &out]),
        3,
        "error[io]",
    );

    fails_with(
        cli(&[&"plan-sensors", &"--config", &config, &"--data-dir", &dir.path(), &"--out", &out]),
        2,
        "plan",
    );

    // Unknown algorithm: rejected by argument parsing, also with code 2.
    let out = cli(&[&"identify", &"--algo", &"sgd", &"--config", &config, &"--data", &data, &"--trace", &out])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn plan_sensors_writes_a_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let streams = dir.path().join("streams");
    std::fs::create_dir(&streams).unwrap();
    let mut cfg = small_config(20);
    for m in 0..6 {
        let mut sc = cfg.scenario.clone();
        sc.sensors = vec![-12000.0 + 2000.0 * m as f64];
        sc.seed = m;
        let path = streams.join(format!("sensor_{m:02}.csv"));
        let c = ExperimentConfig {
            scenario: sc,
            ..cfg.clone()
        };
        let p = write_config(dir.path(), &c);
        ok(cli(&[&"simulate", &"--config", &p, &"--out", &path]));
    }
    cfg.plan = Some(
        serde_json::from_value(serde_json::json!({
            "alpha": 0.05,
            "widths": [200.0, 500.0, 200.0],
            "round_length": 10,
            "initial_sensors": 3,
            "max_sensors": 6,
            "result_noise": [50.0, 500.0, 5.0],
            "seed": 1
        }))
        .unwrap(),
    );
    let config = write_config(dir.path(), &cfg);
    let out = dir.path().join("plan.csv");
    ok(cli(&[&"plan-sensors", &"--config", &config, &"--data-dir", &streams, &"--out", &out]));
    let text = std::fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# manifest "));
    assert_eq!(lines[1], "round,installed,required,raw_required,pool_exhausted,min_r_s,min_r_l,min_r_t");
    assert!(lines[2].starts_with("1,3,"));
    assert!(lines[3].starts_with("2,"));
    assert!(lines.last().unwrap().starts_with("# converged "));
}
