use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluation::OracleConfig;
use crate::io::scenario::ScenarioConfig;
use crate::optimizers::{Algorithm, RunConfig};
use crate::planning::SensorPlanConfig;

/// Sensor-planning experiment: planner settings plus the identification
/// run applied to each sensor's round data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanExperiment {
    #[serde(flatten)]
    pub planner: SensorPlanConfig,
    #[serde(default = "default_plan_algorithm")]
    pub algorithm: Algorithm,
}

fn default_plan_algorithm() -> Algorithm {
    Algorithm::Atgd
}

/// The replication suite run by `bench`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    /// Variants compared on the regret curves.
    pub algorithms: Vec<Algorithm>,
    /// Multi-start counts swept for the multi-start variants.
    pub sweep: Vec<usize>,
    /// Variants run over the sweep.
    pub sweep_algorithms: Vec<Algorithm>,
    /// Spacing of the prefix lengths on the regret curves.
    pub curve_step: usize,
    /// Write gnuplot scripts next to the CSVs.
    pub emit_gnuplot: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            algorithms: Algorithm::ALL.to_vec(),
            sweep: vec![1, 5, 10, 20, 30],
            sweep_algorithms: vec![Algorithm::Mtgd, Algorithm::Mptgd],
            curve_step: 100,
            emit_gnuplot: false,
        }
    }
}

/// Top-level JSON configuration shared by every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub plan: Option<PlanExperiment>,
    #[serde(default)]
    pub bench: Option<BenchConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.run.validate().map_err(|e| Error::Config(e.to_string()))?;
        if let Some(p) = &self.plan {
            p.planner.validate()?;
        }
        if let Some(b) = &self.bench {
            if b.curve_step == 0 {
                return Err(Error::Config("bench curve_step must be positive".into()));
            }
            if b.sweep.contains(&0) {
                return Err(Error::Config("bench sweep entries must be positive".into()));
            }
        }
        Ok(())
    }

    /// Replaces every seed in the configuration.
    pub fn override_seed(&mut self, seed: u64) {
        self.scenario.seed = seed;
        self.run.seed = seed;
        if let Some(p) = &mut self.plan {
            p.planner.seed = seed;
        }
    }
}

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash identifying a run: configuration, seed and input bytes.
pub fn manifest_hash(cfg: &ExperimentConfig, input: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_string(cfg).expect("configuration serializes").as_bytes());
    h.update(cfg.run.seed.to_le_bytes());
    h.update(Sha256::digest(input));
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        ExperimentConfig {
            scenario: ScenarioConfig::truckee(40),
            run: RunConfig::default(),
            oracle: OracleConfig::default(),
            plan: None,
            bench: Some(BenchConfig::default()),
        }
    }

    #[test]
    fn json_round_trip() {
        let c = sample();
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn unknown_top_level_field_is_a_config_error() {
        let mut v: serde_json::Value = serde_json::from_str(&sample().to_json()).unwrap();
        v["surprise"] = serde_json::json!(1);
        assert!(matches!(ExperimentConfig::from_json(&v.to_string()), Err(Error::Config(_))));
    }

    #[test]
    fn manifest_depends_on_seed_and_input() {
        let c = sample();
        let h = manifest_hash(&c, b"abc");
        assert_eq!(h, manifest_hash(&c, b"abc"));
        assert_ne!(h, manifest_hash(&c, b"abd"));
        let mut d = c.clone();
        d.override_seed(9);
        assert_ne!(h, manifest_hash(&d, b"abc"));
    }
}
