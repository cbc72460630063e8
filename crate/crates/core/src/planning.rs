//! Confidence intervals over per-sensor identification results and the
//! sequential sensor-installation planner.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{inv_beta_reg, ln_beta};

use crate::ade::{Observation, RiverParams};
use crate::error::{Error, Result};
use crate::geometry::FeasibleBox;
use crate::linalg::Vec3;

/// Two-sided upper quantile `t_{α/2, dof}` of Student's t.
///
/// Panics on `alpha ∉ (0, 1)` or `dof < 1`; both are programming errors.
pub fn t_quantile(alpha: f64, dof: u64) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha {alpha} outside (0, 1)");
    assert!(dof >= 1, "t quantile needs at least one degree of freedom");
    let nu = dof as f64;
    // P(|T| ≤ t) = I_{t²/(ν+t²)}(1/2, ν/2); invert for the coverage 1 − α.
    let y = inv_beta_reg(0.5, nu / 2.0, 1.0 - alpha);
    let mut t = (nu * y / (1.0 - y)).sqrt();
    // Newton polish on the two-sided coverage.
    let ln_norm = -0.5 * nu.ln() - ln_beta(0.5, nu / 2.0);
    for _ in 0..4 {
        let cover = two_sided_coverage(t, nu);
        let density = 2.0 * (ln_norm - (nu + 1.0) / 2.0 * (t * t / nu).ln_1p()).exp();
        if !(density > 0.0) {
            break;
        }
        let next = t - (cover - (1.0 - alpha)) / density;
        if !next.is_finite() || next <= 0.0 {
            break;
        }
        t = next;
    }
    t
}

fn two_sided_coverage(t: f64, nu: f64) -> f64 {
    let x = t * t / (nu + t * t);
    statrs::function::beta::beta_reg(0.5, nu / 2.0, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn center(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// Sample mean and (n − 1)-denominator standard deviation.
pub fn mean_and_std(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples(samples.len()));
    }
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok((mean, var.sqrt()))
}

/// `mean ± t_{α/2, n−1}·S/√n`.
pub fn confidence_interval(samples: &[f64], alpha: f64) -> Result<Interval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside (0, 1)")));
    }
    let (mean, s) = mean_and_std(samples)?;
    let n = samples.len();
    let half = t_quantile(alpha, n as u64 - 1) * s / (n as f64).sqrt();
    Ok(Interval {
        lower: mean - half,
        upper: mean + half,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorPlanConfig {
    pub alpha: f64,
    /// Acceptable interval lengths for (s, l, t).
    pub widths: [f64; 3],
    /// Iterations per round.
    pub round_length: usize,
    pub initial_sensors: usize,
    /// Size of the available sensor pool.
    pub max_sensors: usize,
    /// Standard deviations of the error added to each identification result.
    #[serde(default)]
    pub result_noise: [f64; 3],
    #[serde(default)]
    pub seed: u64,
}

impl SensorPlanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.widths.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Config(format!("interval widths {:?} must be positive", self.widths)));
        }
        if self.round_length == 0 {
            return Err(Error::Config("round length must be positive".into()));
        }
        if self.initial_sensors < 2 {
            return Err(Error::Config("at least 2 initial sensors are needed".into()));
        }
        if self.max_sensors < self.initial_sensors {
            return Err(Error::Config(format!(
                "pool of {} cannot hold the {} initial sensors",
                self.max_sensors, self.initial_sensors
            )));
        }
        if self.result_noise.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Config("result noise deviations must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRound {
    /// 1-based round index.
    pub round: usize,
    /// Sensors installed going into the round.
    pub installed: usize,
    /// Per-dimension records `R_{i,n}` for subset sizes n = 2, …, installed.
    pub records: [Vec<usize>; 3],
    /// Count before clamping to the pool.
    pub raw_required: usize,
    /// Count carried into the next round.
    pub required: usize,
    /// The raw count exceeded the pool.
    pub pool_exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSchedule {
    pub rounds: Vec<PlanRound>,
    /// The last two rounds asked for the same count.
    pub converged: bool,
}

impl PlanSchedule {
    pub fn counts(&self) -> Vec<usize> {
        self.rounds.iter().map(|r| r.required).collect()
    }

    pub fn final_count(&self) -> Option<usize> {
        self.rounds.last().map(|r| r.required)
    }

    pub fn any_pool_exhausted(&self) -> bool {
        self.rounds.iter().any(|r| r.pool_exhausted)
    }
}

/// `⌈(t_{α/2, m−1}·S/d)²⌉` for the first `m` values.
fn raw_update(values: &[f64], m: usize, alpha: f64, d: f64) -> Result<usize> {
    let (_, s) = mean_and_std(&values[..m])?;
    let v = (t_quantile(alpha, m as u64 - 1) * s / d).powi(2).ceil();
    Ok(if v.is_finite() && v < usize::MAX as f64 { v as usize } else { usize::MAX })
}

/// Bisection for one dimension and subset size `n`; returns `R_{i,n}`.
fn required_for_subset(values: &[f64], n: usize, installed: usize, alpha: f64, d: f64) -> Result<usize> {
    let mut m = n.max(2);
    let mut seen = HashSet::from([m]);
    loop {
        let hat = raw_update(values, m, alpha, d)?;
        let tilde = m.saturating_add(hat).div_ceil(2).max(2);
        if installed < tilde {
            return Ok(tilde);
        }
        if hat == tilde {
            return Ok(tilde);
        }
        if !seen.insert(tilde) {
            // Integer bisection cycles; settle on the smaller of the pair.
            return Ok(tilde.min(m));
        }
        m = tilde;
    }
}

/// One round of the planner over identification results of the installed
/// sensors (in installation order).
pub fn plan_round(results: &[Vec3], installed: usize, cfg: &SensorPlanConfig) -> Result<[Vec<usize>; 3]> {
    if results.len() < installed || installed < 2 {
        return Err(Error::TooFewSamples(results.len().min(installed)));
    }
    let mut records: [Vec<usize>; 3] = Default::default();
    for (k, rec) in records.iter_mut().enumerate() {
        let values: Vec<f64> = results[..installed].iter().map(|x| x[k]).collect();
        for n in 2..=installed {
            rec.push(required_for_subset(&values, n, installed, cfg.alpha, cfg.widths[k])?);
        }
    }
    Ok(records)
}

/// Required count `max_k min_n R^k_{i,n}`, floored at 2.
pub fn aggregate(records: &[Vec<usize>; 3]) -> usize {
    records
        .iter()
        .map(|r| r.iter().copied().min().unwrap_or(2))
        .max()
        .unwrap_or(2)
        .max(2)
}

/// Count the interval widths call for when every result is available.
pub fn oracle_count(results: &[Vec3], cfg: &SensorPlanConfig) -> Result<usize> {
    let m = results.len();
    let mut need = 2usize;
    for k in 0..3 {
        let values: Vec<f64> = results.iter().map(|x| x[k]).collect();
        need = need.max(raw_update(&values, m, cfg.alpha, cfg.widths[k])?);
    }
    Ok(need)
}

/// Seeded identification errors for every pool sensor in `round`.
pub fn result_noise(cfg: &SensorPlanConfig, round: usize) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(round as u64);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    (0..cfg.max_sensors)
        .map(|_| {
            let z: [f64; 3] = std::array::from_fn(|_| unit.sample(&mut rng));
            std::array::from_fn(|k| cfg.result_noise[k] * z[k])
        })
        .collect()
}

/// Sequential installation: each round identifies the source separately
/// at every installed sensor from that round's data alone (cold start),
/// perturbs the results with the configured error, and updates the count.
///
/// `streams[m]` is sensor m's time-ordered stream; iteration j of a round
/// is the j-th observation of each stream within the round.
pub fn plan_sensors<F>(
    streams: &[Vec<Observation>],
    b: &FeasibleBox,
    p: &RiverParams,
    runner: F,
    cfg: &SensorPlanConfig,
) -> Result<PlanSchedule>
where
    F: Fn(&[Observation], &FeasibleBox, &RiverParams) -> Result<Vec3> + Sync,
{
    cfg.validate()?;
    if streams.len() < cfg.initial_sensors {
        return Err(Error::Config(format!(
            "{} sensor streams for {} initial sensors",
            streams.len(),
            cfg.initial_sensors
        )));
    }
    let pool = cfg.max_sensors.min(streams.len());
    let horizon = streams[..pool].iter().map(Vec::len).min().unwrap_or(0);
    let n_rounds = horizon / cfg.round_length + usize::from(horizon % cfg.round_length != 0);

    let mut installed = cfg.initial_sensors.min(pool);
    let mut rounds = Vec::with_capacity(n_rounds);
    for i in 0..n_rounds {
        let lo = i * cfg.round_length;
        let hi = (lo + cfg.round_length).min(horizon);
        let noise = result_noise(cfg, i + 1);
        let results: Vec<Vec3> = (0..installed)
            .into_par_iter()
            .map(|m| {
                let x = runner(&streams[m][lo..hi], b, p).map_err(|e| e.in_path(m))?;
                Ok(std::array::from_fn(|k| x[k] + noise[m][k]))
            })
            .collect::<Result<_>>()?;
        let records = plan_round(&results, installed, cfg)?;
        let raw = aggregate(&records);
        let exhausted = raw > pool;
        if exhausted {
            log::warn!(
                "round {}: {}",
                i + 1,
                Error::PoolExhausted {
                    required: raw,
                    available: pool
                }
            );
        }
        let required = raw.clamp(2, pool);
        rounds.push(PlanRound {
            round: i + 1,
            installed,
            records,
            raw_required: raw,
            required,
            pool_exhausted: exhausted,
        });
        installed = required;
    }
    let converged = rounds.len() >= 2 && rounds[rounds.len() - 1].required == rounds[rounds.len() - 2].required;
    Ok(PlanSchedule { rounds, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cauchy_quantile_is_one() {
        assert_abs_diff_eq!(t_quantile(0.5, 1), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn table_value_ten_dof() {
        assert_abs_diff_eq!(t_quantile(0.05, 10), 2.228138851986274, epsilon = 1e-8);
    }

    #[test]
    fn normal_limit() {
        assert_abs_diff_eq!(t_quantile(0.05, 1_000_000), 1.959966, epsilon = 1e-3);
    }

    #[test]
    fn constant_samples_give_point_interval() {
        let ci = confidence_interval(&[4.0; 7], 0.05).unwrap();
        assert_eq!((ci.lower, ci.upper), (4.0, 4.0));
    }

    #[test]
    fn two_sample_interval() {
        let ci = confidence_interval(&[0.0, 2.0], 0.5).unwrap();
        assert_abs_diff_eq!(ci.lower, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(ci.upper, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn one_sample_is_rejected() {
        assert_eq!(confidence_interval(&[1.0], 0.05), Err(Error::TooFewSamples(1)));
    }

    fn cfg(widths: [f64; 3]) -> SensorPlanConfig {
        SensorPlanConfig {
            alpha: 0.05,
            widths,
            round_length: 5,
            initial_sensors: 4,
            max_sensors: 10,
            result_noise: [0.0; 3],
            seed: 0,
        }
    }

    #[test]
    fn zero_spread_collapses_to_floor() {
        let results = vec![[1.0, 2.0, 3.0]; 6];
        let r = plan_round(&results, 6, &cfg([1.0; 3])).unwrap();
        assert!(r.iter().all(|v| v.iter().all(|&c| c == 2)));
        assert_eq!(aggregate(&r), 2);
    }

    #[test]
    fn wide_spread_jumps_out() {
        let results: Vec<Vec3> = (0..4).map(|i| [100.0 * i as f64, 0.0, 0.0]).collect();
        let r = plan_round(&results, 4, &cfg([1.0; 3])).unwrap();
        assert!(r[0].iter().all(|&c| c > 4));
    }

    #[test]
    fn planner_runs_rounds_and_clamps() {
        let obs = Observation {
            sensor_id: 0,
            sensor_location: 0.0,
            sample_time: 1.0,
            concentration: 0.0,
        };
        let streams = vec![vec![obs; 12]; 10];
        let b = FeasibleBox::new((0.0, 1.0), (-2.0, -1.0), (-2.0, -1.0)).unwrap();
        let p = RiverParams::truckee();
        let mut c = cfg([1e-3; 3]);
        c.result_noise = [1.0, 1.0, 1.0];
        let runner = |_: &[Observation], _: &FeasibleBox, _: &RiverParams| Ok([0.0; 3]);
        let s = plan_sensors(&streams, &b, &p, runner, &c).unwrap();
        assert_eq!(s.rounds.len(), 3);
        assert!(s.any_pool_exhausted());
        assert_eq!(s.final_count(), Some(10));
        let again = plan_sensors(&streams, &b, &p, runner, &c).unwrap();
        assert_eq!(s, again);
    }
}
