//! Synthetic data, file formats and run manifests.

pub mod bench;
pub mod config;
pub mod csv;
pub mod gnuplot;
pub mod scenario;

pub use config::{manifest_hash, sha256_hex, BenchConfig, ExperimentConfig, PlanExperiment};
pub use csv::{load_observations, load_trace, read_manifest, write_observations, write_trace, TraceFile, TraceRow};
pub use scenario::{generate_synthetic, NoiseModel, SamplingSchedule, ScenarioConfig};
