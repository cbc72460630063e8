use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ade::{ade_concentration, Observation, RiverParams, SourceEstimate};
use crate::error::{Error, Result};
use crate::geometry::FeasibleBox;

/// When each sensor samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SamplingSchedule {
    /// `samples` in total, split evenly across sensors and spaced uniformly
    /// over each sensor's plume passage, `half_width` temporal standard
    /// deviations either side of the peak.
    PlumeWindow { samples: usize, half_width: f64 },
    /// The same sample times at every sensor.
    Fixed { times: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NoiseModel {
    #[default]
    None,
    Gaussian { std: f64 },
    /// Gaussian with standard deviation proportional to the clean value.
    Relative { fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub river: RiverParams,
    pub truth: SourceEstimate,
    pub sensors: Vec<f64>,
    pub schedule: SamplingSchedule,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub seed: u64,
    pub feasible_box: FeasibleBox,
}

impl ScenarioConfig {
    /// Truckee-like reach: A = 60 m², D = 2430 m²/min, v = 80 m/min, with
    /// the source (1300, −22106, −215) and four downstream sensors. Masses
    /// are in kilograms and concentrations in g/m³.
    pub fn truckee(samples: usize) -> Self {
        ScenarioConfig {
            river: RiverParams::truckee(),
            truth: SourceEstimate::new(1300.0, -22106.0, -215.0),
            sensors: vec![-12000.0, -6000.0, 0.0, 6000.0],
            schedule: SamplingSchedule::PlumeWindow {
                samples,
                half_width: 3.0,
            },
            noise: NoiseModel::None,
            seed: 0,
            feasible_box: FeasibleBox::new((500.0, 2500.0), (-30000.0, -14000.0), (-300.0, -130.0))
                .expect("static box is valid"),
        }
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Peak arrival time and temporal spread of the plume at `l_m`.
    pub fn passage(&self, l_m: f64) -> Result<(f64, f64)> {
        let dist = l_m - self.truth.location;
        if dist <= 0.0 {
            return Err(Error::Config(format!("sensor at {l_m} is not downstream of the source")));
        }
        let travel = dist / self.river.velocity;
        let spread = (2.0 * self.river.dispersion * travel).sqrt() / self.river.velocity;
        Ok((self.truth.release_time + travel, spread))
    }

    /// (sensor id, location, time) triples in stream order: by time, ties by id.
    pub fn sampling_plan(&self) -> Result<Vec<(u32, f64, f64)>> {
        let mut plan = Vec::new();
        match &self.schedule {
            SamplingSchedule::PlumeWindow { samples, half_width } => {
                let m = self.sensors.len();
                for (i, &l) in self.sensors.iter().enumerate() {
                    let count = samples / m + usize::from(i < samples % m);
                    let (peak, spread) = self.passage(l)?;
                    let lo = peak - half_width * spread;
                    let hi = peak + half_width * spread;
                    for j in 0..count {
                        let frac = if count == 1 { 0.5 } else { j as f64 / (count - 1) as f64 };
                        plan.push((i as u32, l, lo + frac * (hi - lo)));
                    }
                }
            }
            SamplingSchedule::Fixed { times } => {
                for (i, &l) in self.sensors.iter().enumerate() {
                    for &t in times {
                        plan.push((i as u32, l, t));
                    }
                }
            }
        }
        plan.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        self.river.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.feasible_box.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.sensors.is_empty() {
            return Err(Error::Config("scenario needs at least one sensor".into()));
        }
        if let SamplingSchedule::PlumeWindow { samples, half_width } = self.schedule {
            if samples == 0 || !(half_width > 0.0) {
                return Err(Error::Config("plume window needs samples > 0 and half_width > 0".into()));
            }
        }
        match self.noise {
            NoiseModel::Gaussian { std } if !(std >= 0.0) => {
                return Err(Error::Config(format!("noise std {std} must be nonnegative")))
            }
            NoiseModel::Relative { fraction } if !(fraction >= 0.0) => {
                return Err(Error::Config(format!("noise fraction {fraction} must be nonnegative")))
            }
            _ => {}
        }
        for (_, _, t) in self.sampling_plan()? {
            if t <= self.truth.release_time {
                return Err(Error::Config(format!(
                    "sample time {t} precedes the release at {}",
                    self.truth.release_time
                )));
            }
        }
        Ok(())
    }
}

/// Observations of the planted source, seeded noise added.
pub fn generate_synthetic(sc: &ScenarioConfig) -> Result<Vec<Observation>> {
    sc.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    sc.sampling_plan()?
        .into_iter()
        .map(|(id, l, t)| {
            let clean = ade_concentration(&sc.truth, l, t, &sc.river)?;
            let noise = match sc.noise {
                NoiseModel::None => 0.0,
                NoiseModel::Gaussian { std } => std * unit.sample(&mut rng),
                NoiseModel::Relative { fraction } => fraction * clean.abs() * unit.sample(&mut rng),
            };
            Ok(Observation {
                sensor_id: id,
                sensor_location: l,
                sample_time: t,
                concentration: clean + noise,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ade::residual;

    #[test]
    fn noiseless_truth_has_zero_residual() {
        let sc = ScenarioConfig::truckee(200);
        let obs = generate_synthetic(&sc).unwrap();
        assert_eq!(obs.len(), 200);
        for o in &obs {
            assert_eq!(residual(&sc.truth, o, &sc.river).unwrap(), 0.0);
        }
        sc.feasible_box.validate_for(&obs).unwrap();
    }

    #[test]
    fn stream_is_time_ordered() {
        let obs = generate_synthetic(&ScenarioConfig::truckee(101)).unwrap();
        assert!(obs.windows(2).all(|w| w[0].sample_time <= w[1].sample_time));
    }

    #[test]
    fn gaussian_noise_spread() {
        let mut sc = ScenarioConfig::truckee(10_000).with_noise(NoiseModel::Gaussian { std: 0.05 });
        sc.seed = 11;
        let noisy = generate_synthetic(&sc).unwrap();
        let clean = generate_synthetic(&ScenarioConfig::truckee(10_000)).unwrap();
        let d: Vec<f64> = noisy.iter().zip(&clean).map(|(a, b)| a.concentration - b.concentration).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
        assert!((var.sqrt() / 0.05 - 1.0).abs() < 0.03);
    }

    #[test]
    fn upstream_sensor_rejected() {
        let mut sc = ScenarioConfig::truckee(10);
        sc.sensors.push(-30000.0);
        assert!(matches!(generate_synthetic(&sc), Err(Error::Config(_))));
    }
}
