use serde::{Deserialize, Serialize};

use super::{Algorithm, RunConfig};
use crate::linalg::Vec3;

/// One perturbation and, once decided, whether it bought a decrease.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbEvent {
    /// Inner step at which the kick fired.
    pub step: u64,
    pub value_before: f64,
    /// Objective value `t_thres` steps later, if reached.
    pub value_after: Option<f64>,
    pub escaped: Option<bool>,
}

/// Row `n`: the estimate played against observation `n` and what the
/// epoch solving window `n` did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub n: usize,
    pub x: Vec3,
    /// Accepted step of the epoch started from `x`.
    pub eta: Vec3,
    /// Initial step of the line search this epoch.
    pub eta0: Vec3,
    /// Inner steps summed over paths.
    pub inner_steps: u64,
    /// Cumulative gradient calls (per loss term) over all paths.
    pub grad_calls: u64,
    /// Loss of the newest observation at `x`.
    pub loss: f64,
    /// `‖∇_{F,η}F(x)‖²` with `η = eta`.
    pub local_contrib: f64,
    /// `‖g_proj‖` at the winning path's returned point.
    pub exit_gradient_norm: f64,
    pub winner: usize,
    pub perturbations: u32,
    pub escapes: u32,
    /// Paths whose epoch budget ran out (multi-start only).
    pub exhausted: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub paths: usize,
    pub config: RunConfig,
    pub records: Vec<IterationRecord>,
    /// Estimate after the last observation.
    pub final_estimate: Vec3,
    /// Seconds since the run started, per record. Excluded from outputs.
    #[serde(skip)]
    pub wall_time: Vec<f64>,
    #[serde(skip)]
    pub inner_values: Vec<Vec<f64>>,
    #[serde(skip)]
    pub events: Vec<Vec<PerturbEvent>>,
}

impl RunTrace {
    pub(crate) fn new(algorithm: Algorithm, config: RunConfig, paths: usize) -> Self {
        RunTrace {
            algorithm,
            seed: config.seed,
            paths,
            config,
            records: Vec::new(),
            final_estimate: [0.0; 3],
            wall_time: Vec::new(),
            inner_values: Vec::new(),
            events: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, r: IterationRecord, wall: f64, inner: Vec<f64>, events: Vec<PerturbEvent>) {
        self.records.push(r);
        self.wall_time.push(wall);
        self.inner_values.push(inner);
        self.events.push(events);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_inner_steps(&self) -> u64 {
        self.records.iter().map(|r| r.inner_steps).sum()
    }

    pub fn total_grad_calls(&self) -> u64 {
        self.records.last().map_or(0, |r| r.grad_calls)
    }

    /// Sum of recorded per-iteration losses.
    pub fn total_loss(&self) -> f64 {
        self.records.iter().map(|r| r.loss).sum()
    }

    /// Sum of recorded local-regret contributions.
    pub fn local_regret(&self) -> f64 {
        self.records.iter().map(|r| r.local_contrib).sum()
    }

    /// Componentwise minimum of accepted steps.
    pub fn min_eta(&self) -> Vec3 {
        self.records.iter().fold([f64::INFINITY; 3], |m, r| {
            [m[0].min(r.eta[0]), m[1].min(r.eta[1]), m[2].min(r.eta[2])]
        })
    }
}
