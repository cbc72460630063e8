//! Helpers shared by the integration tests.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use source_trace::geometry::{FeasibleBox, StepVector};
use source_trace::linalg::Vec3;
use source_trace::optimizers::{aptgd_epoch, aptgd_params, PerturbConfig};
use source_trace::smoothing::{FnObjective, Objective};
use source_trace::step_control::LineSearchConfig;

/// `x² − y² + y⁴/2 + z²`: a strict saddle at the origin between minima at
/// `y = ±1` (value −1/2).
pub fn saddle_value(p: &Vec3) -> f64 {
    p[0] * p[0] - p[1] * p[1] + 0.5 * p[1].powi(4) + p[2] * p[2]
}

pub fn saddle_gradient(p: &Vec3) -> Vec3 {
    [2.0 * p[0], -2.0 * p[1] + 2.0 * p[1].powi(3), 2.0 * p[2]]
}

pub fn saddle_box() -> FeasibleBox {
    FeasibleBox::new((-2.0, 2.0), (-2.0, 2.0), (-2.0, 2.0)).unwrap()
}

/// Thresholds for the surrogate: κ = 2 and ι = 12 are its gradient and
/// Hessian moduli on the unit ball, Δf = 1/2 the saddle-to-minimum drop.
pub fn saddle_config(delta: f64) -> PerturbConfig {
    aptgd_params(1.0, 0.1, delta, 0.5, 2.0, 12.0).unwrap()
}

pub struct EscapeTrial {
    pub escaped: bool,
    pub decrease: f64,
}

/// One perturbed epoch started exactly at the saddle; reports the outcome
/// of its first escape check.
pub fn saddle_escape(seed: u64, pc: &PerturbConfig) -> EscapeTrial {
    let obj = FnObjective::new(saddle_value, saddle_gradient);
    let b = saddle_box();
    let eta0 = StepVector::uniform(pc.c / pc.kappa).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = aptgd_epoch(&obj, &[0.0; 3], &eta0, pc, &b, &LineSearchConfig::default(), &mut rng, 100_000_000, false)
        .unwrap();
    let ev = out.events.first().expect("the saddle triggers a perturbation");
    let after = ev.value_after.expect("escape check ran");
    EscapeTrial {
        escaped: ev.escaped == Some(true),
        decrease: ev.value_before - after,
    }
}

pub fn objective_value<O: Objective>(o: &O, x: &Vec3) -> f64 {
    o.value(x).unwrap()
}
