//! Observation and trace CSV files.
//!
//! Both formats are LF-terminated UTF-8 with a header row; floats use the
//! shortest representation that reads back exactly. Lines starting with
//! `#` are comments; `# manifest <hash>` records the run manifest.

use std::fmt::Write as _;

use crate::ade::Observation;
use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::optimizers::{Algorithm, IterationRecord, RunConfig, RunTrace};

pub const OBSERVATION_HEADER: &str = "sensor_id,location_m,time_min,concentration";
pub const TRACE_HEADER: &str = "n,s,l,t,eta_s,eta_l,eta_t,inner_steps,grad_calls,loss,local_contrib";

const MANIFEST_PREFIX: &str = "# manifest ";
const FINAL_PREFIX: &str = "# final ";

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// The manifest hash recorded in a file's comment lines, if any.
pub fn read_manifest(text: &str) -> Option<String> {
    text.lines()
        .find_map(|l| l.strip_prefix(MANIFEST_PREFIX))
        .map(|s| s.trim().to_string())
}

/// Data rows with their 1-based line numbers, header checked.
fn data_rows<'a>(text: &'a str, header: &str) -> Result<Vec<(usize, &'a str)>> {
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim_end_matches('\r');
        if l.starts_with('#') || l.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if l.trim() != header {
                return Err(parse_err(line, 1, format!("expected header `{header}`")));
            }
            seen_header = true;
            continue;
        }
        rows.push((line, l));
    }
    if !seen_header {
        return Err(parse_err(1, 1, format!("missing header `{header}`")));
    }
    Ok(rows)
}

fn fields<'a>(line: usize, row: &'a str, expected: usize) -> Result<Vec<&'a str>> {
    let f: Vec<&str> = row.split(',').map(str::trim).collect();
    if f.len() != expected {
        return Err(parse_err(
            line,
            f.len().min(expected) + 1,
            format!("expected {expected} fields, found {}", f.len()),
        ));
    }
    Ok(f)
}

fn num<T: std::str::FromStr>(line: usize, column: usize, s: &str, what: &str) -> Result<T> {
    if s.is_empty() {
        return Err(parse_err(line, column, format!("missing {what}")));
    }
    s.parse()
        .map_err(|_| parse_err(line, column, format!("cannot parse {what} from `{s}`")))
}

fn finite(line: usize, column: usize, s: &str, what: &str) -> Result<f64> {
    let v: f64 = num(line, column, s, what)?;
    if !v.is_finite() {
        return Err(parse_err(line, column, format!("{what} must be finite")));
    }
    Ok(v)
}

pub fn load_observations(text: &str) -> Result<Vec<Observation>> {
    let mut out = Vec::new();
    for (line, row) in data_rows(text, OBSERVATION_HEADER)? {
        let f = fields(line, row, 4)?;
        let o = Observation {
            sensor_id: num(line, 1, f[0], "sensor_id")?,
            sensor_location: finite(line, 2, f[1], "location_m")?,
            sample_time: finite(line, 3, f[2], "time_min")?,
            concentration: finite(line, 4, f[3], "concentration")?,
        };
        if o.concentration < 0.0 {
            log::warn!("line {line}: negative concentration {} kept", o.concentration);
        }
        out.push(o);
    }
    Ok(out)
}

/// Canonical text of `obs`, with a manifest comment when given.
pub fn write_observations(obs: &[Observation], manifest: Option<&str>) -> String {
    let mut s = String::new();
    if let Some(m) = manifest {
        let _ = writeln!(s, "{MANIFEST_PREFIX}{m}");
    }
    s.push_str(OBSERVATION_HEADER);
    s.push('\n');
    for o in obs {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            o.sensor_id, o.sensor_location, o.sample_time, o.concentration
        );
    }
    s
}

/// One row of a trace file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub n: usize,
    pub x: Vec3,
    pub eta: Vec3,
    pub inner_steps: u64,
    pub grad_calls: u64,
    pub loss: f64,
    pub local_contrib: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub manifest: Option<String>,
    pub rows: Vec<TraceRow>,
    pub final_estimate: Option<Vec3>,
}

impl TraceFile {
    pub fn from_trace(trace: &RunTrace, manifest: Option<String>) -> Self {
        TraceFile {
            manifest,
            rows: trace
                .records
                .iter()
                .map(|r| TraceRow {
                    n: r.n,
                    x: r.x,
                    eta: r.eta,
                    inner_steps: r.inner_steps,
                    grad_calls: r.grad_calls,
                    loss: r.loss,
                    local_contrib: r.local_contrib,
                })
                .collect(),
            final_estimate: Some(trace.final_estimate),
        }
    }

    /// Played points in order.
    pub fn points(&self) -> Vec<Vec3> {
        self.rows.iter().map(|r| r.x).collect()
    }

    pub fn steps(&self) -> Vec<Vec3> {
        self.rows.iter().map(|r| r.eta).collect()
    }

    /// Rebuilds a trace for the regret evaluators. Fields the file does not
    /// carry (winners, perturbation counts, timings) are left empty.
    pub fn to_run_trace(&self, algorithm: Algorithm, config: RunConfig) -> RunTrace {
        let paths = config.multi_start;
        let mut t = RunTrace::new(algorithm, config, paths);
        for r in &self.rows {
            t.push(
                IterationRecord {
                    n: r.n,
                    x: r.x,
                    eta: r.eta,
                    eta0: r.eta,
                    inner_steps: r.inner_steps,
                    grad_calls: r.grad_calls,
                    loss: r.loss,
                    local_contrib: r.local_contrib,
                    exit_gradient_norm: f64::NAN,
                    winner: 0,
                    perturbations: 0,
                    escapes: 0,
                    exhausted: 0,
                },
                0.0,
                Vec::new(),
                Vec::new(),
            );
        }
        t.final_estimate = self
            .final_estimate
            .or_else(|| self.rows.last().map(|r| r.x))
            .unwrap_or([f64::NAN; 3]);
        t
    }
}

pub fn write_trace(t: &TraceFile) -> String {
    let mut s = String::new();
    if let Some(m) = &t.manifest {
        let _ = writeln!(s, "{MANIFEST_PREFIX}{m}");
    }
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for r in &t.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.n, r.x[0], r.x[1], r.x[2], r.eta[0], r.eta[1], r.eta[2], r.inner_steps, r.grad_calls, r.loss, r.local_contrib
        );
    }
    if let Some(f) = t.final_estimate {
        let _ = writeln!(s, "{FINAL_PREFIX}{},{},{}", f[0], f[1], f[2]);
    }
    s
}

pub fn load_trace(text: &str) -> Result<TraceFile> {
    let mut rows = Vec::new();
    for (line, row) in data_rows(text, TRACE_HEADER)? {
        let f = fields(line, row, 11)?;
        let fl = |c: usize, what: &str| finite(line, c + 1, f[c], what);
        rows.push(TraceRow {
            n: num(line, 1, f[0], "n")?,
            x: [fl(1, "s")?, fl(2, "l")?, fl(3, "t")?],
            eta: [fl(4, "eta_s")?, fl(5, "eta_l")?, fl(6, "eta_t")?],
            inner_steps: num(line, 8, f[7], "inner_steps")?,
            grad_calls: num(line, 9, f[8], "grad_calls")?,
            loss: fl(9, "loss")?,
            local_contrib: fl(10, "local_contrib")?,
        });
    }
    let mut final_estimate = None;
    for (i, l) in text.lines().enumerate() {
        if let Some(rest) = l.strip_prefix(FINAL_PREFIX) {
            let f = fields(i + 1, rest, 3)?;
            final_estimate = Some([
                finite(i + 1, 1, f[0], "s")?,
                finite(i + 1, 2, f[1], "l")?,
                finite(i + 1, 3, f[2], "t")?,
            ]);
        }
    }
    Ok(TraceFile {
        manifest: read_manifest(text),
        rows,
        final_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{generate_synthetic, NoiseModel, ScenarioConfig};

    #[test]
    fn observation_round_trip_is_byte_identical() {
        let sc = ScenarioConfig::truckee(60).with_noise(NoiseModel::Relative { fraction: 0.05 });
        let obs = generate_synthetic(&sc).unwrap();
        let text = write_observations(&obs, Some("abc123"));
        let back = load_observations(&text).unwrap();
        assert_eq!(back, obs);
        assert_eq!(write_observations(&back, read_manifest(&text).as_deref()), text);
    }

    #[test]
    fn negative_concentration_is_kept() {
        let text = format!("{OBSERVATION_HEADER}\n0,10,5,-0.25\n");
        assert_eq!(load_observations(&text).unwrap()[0].concentration, -0.25);
    }

    #[test]
    fn missing_field_names_the_line() {
        let text = format!("# manifest x\n{OBSERVATION_HEADER}\n0,10,5,1\n1,20,6\n");
        match load_observations(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_number_names_the_column() {
        let text = format!("{OBSERVATION_HEADER}\n0,10,abc,1\n");
        assert!(matches!(
            load_observations(&text),
            Err(Error::Parse { line: 2, column: 3, .. })
        ));
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(matches!(load_observations("a,b,c,d\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn trace_round_trip() {
        let t = TraceFile {
            manifest: Some("ff".into()),
            rows: vec![TraceRow {
                n: 1,
                x: [1300.5, -22106.25, -215.125],
                eta: [0.1, 1e-7, 3.0],
                inner_steps: 12,
                grad_calls: 40,
                loss: 1.5e-9,
                local_contrib: 0.0,
            }],
            final_estimate: Some([1.0, 2.0, 3.0]),
        };
        let text = write_trace(&t);
        assert_eq!(load_trace(&text).unwrap(), t);
    }
}
