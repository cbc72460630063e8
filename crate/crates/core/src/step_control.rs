//! Initial step sizes from grid Lipschitz estimates, and the normalized
//! backtracking line search that shrinks them.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::ade::{axis_grid, box_grid};
use crate::error::{Error, Result};
use crate::geometry::{project, projected_gradient, FeasibleBox, StepVector};
use crate::linalg::{self, Vec3};
use crate::smoothing::Objective;

/// Below this projected-gradient norm the search direction is undefined and
/// the initial step is returned unchanged.
pub const DIRECTION_GUARD: f64 = 1e-12;

static STALLS: AtomicU64 = AtomicU64::new(0);

/// Line searches that hit `max_shrinks` since the process started.
pub fn stall_count() -> u64 {
    STALLS.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineSearchConfig {
    /// Armijo constant (distinct from the smoothness modulus).
    pub armijo_beta: f64,
    /// Per-dimension shrink factors τ.
    pub shrink: Vec3,
    /// Maximum number of shrinks L_max.
    pub max_shrinks: usize,
    /// Use the conventional sufficient-decrease test instead of the
    /// normalized test with additive slack.
    pub classic_armijo: bool,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        LineSearchConfig {
            armijo_beta: 8e-6,
            shrink: [0.5; 3],
            max_shrinks: 60,
            classic_armijo: false,
        }
    }
}

impl LineSearchConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.armijo_beta > 0.0
            && self.armijo_beta < 1.0
            && self.shrink.iter().all(|t| *t > 0.0 && *t < 1.0)
            && self.max_shrinks > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("line search config {self:?}")))
        }
    }
}

/// How per-axis step sizes relate to per-axis Lipschitz moduli.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOrientation {
    /// η_i ∝ 1/κ_i: every axis moves by a comparable amount.
    InverseModulus,
    /// η_i ∝ κ_i.
    Modulus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    /// Grid points per axis K (≥ 2).
    pub points_per_axis: usize,
    pub modulus_floor: f64,
    /// Ratio between ‖η⁰‖_min/‖η⁰‖_∞² and β̂/2.
    pub step_scale: f64,
    pub orientation: StepOrientation,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            points_per_axis: 5,
            modulus_floor: 1e-300,
            step_scale: 100.0,
            orientation: StepOrientation::InverseModulus,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.points_per_axis < 2 || !(self.modulus_floor > 0.0) || !(self.step_scale > 0.0) {
            return Err(Error::InvalidParameter(format!("grid config {self:?}")));
        }
        Ok(())
    }
}

/// Result of the initial step-size construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialSteps {
    pub eta: StepVector,
    /// Per-axis Lipschitz estimates (κ̂_s, κ̂_l, κ̂_t) after flooring.
    pub moduli: Vec3,
    /// Estimated smoothness modulus β̂ after flooring.
    pub smoothness: f64,
    /// Set for every axis whose modulus was replaced by the floor.
    pub degenerate: [bool; 3],
}

/// Per-axis maxima of absolute difference quotients over the uniform
/// `K³` grid, varying one axis while the other two sit on grid values.
pub fn grid_moduli<O: Objective + ?Sized>(obj: &O, b: &FeasibleBox, k: usize) -> Result<Vec3> {
    let axes = [
        axis_grid(b.mass_range.lo, b.mass_range.hi, k),
        axis_grid(b.location_range.lo, b.location_range.hi, k),
        axis_grid(b.time_range.lo, b.time_range.hi, k),
    ];
    let (ns, nl, nt) = (axes[0].len(), axes[1].len(), axes[2].len());
    let mut values = vec![0.0; ns * nl * nt];
    for i in 0..ns {
        for j in 0..nl {
            for l in 0..nt {
                values[(i * nl + j) * nt + l] = obj.value(&[axes[0][i], axes[1][j], axes[2][l]])?;
            }
        }
    }
    let at = |i: usize, j: usize, l: usize| values[(i * nl + j) * nt + l];
    let mut moduli = [0.0f64; 3];
    let dims = [ns, nl, nt];
    for axis in 0..3 {
        let others: Vec<usize> = (0..3).filter(|d| *d != axis).collect();
        for a in 0..dims[others[0]] {
            for c in 0..dims[others[1]] {
                let pick = |v: usize| {
                    let mut idx = [0usize; 3];
                    idx[axis] = v;
                    idx[others[0]] = a;
                    idx[others[1]] = c;
                    at(idx[0], idx[1], idx[2])
                };
                for p in 0..dims[axis] {
                    for q in (p + 1)..dims[axis] {
                        let dx = (axes[axis][p] - axes[axis][q]).abs();
                        if dx > 0.0 {
                            let slope = (pick(p) - pick(q)).abs() / dx;
                            moduli[axis] = moduli[axis].max(slope);
                        }
                    }
                }
            }
        }
    }
    Ok(moduli)
}

/// Largest Hessian spectral norm over the `K³` grid.
pub fn grid_smoothness<O: Objective + ?Sized>(obj: &O, b: &FeasibleBox, k: usize) -> Result<f64> {
    let mut beta: f64 = 0.0;
    for x in box_grid(b, k) {
        beta = beta.max(linalg::symmetric_spectral_norm(&obj.hessian(&x)?));
    }
    Ok(beta)
}

/// Builds η⁰ with η⁰_i tied to κ̂_i (per `orientation`) and scaled so that
/// `‖η⁰‖_min / ‖η⁰‖_∞² = step_scale · β̂ / 2`.
pub fn init_step_sizes<O: Objective + ?Sized>(
    obj: &O,
    b: &FeasibleBox,
    g: &GridConfig,
) -> Result<InitialSteps> {
    g.validate()?;
    let raw = grid_moduli(obj, b, g.points_per_axis)?;
    let mut degenerate = [false; 3];
    let mut moduli = raw;
    for i in 0..3 {
        if !(raw[i] >= g.modulus_floor) {
            log::warn!(
                "{}",
                Error::DegenerateAxis {
                    axis: i,
                    modulus: raw[i],
                    floor: g.modulus_floor
                }
            );
            moduli[i] = g.modulus_floor;
            degenerate[i] = true;
        }
    }
    let smoothness = grid_smoothness(obj, b, g.points_per_axis)?.max(g.modulus_floor);
    let eta = steps_from_moduli(&moduli, smoothness, g)?;
    Ok(InitialSteps {
        eta,
        moduli,
        smoothness,
        degenerate,
    })
}

pub(crate) fn steps_from_moduli(moduli: &Vec3, smoothness: f64, g: &GridConfig) -> Result<StepVector> {
    // Normalize the direction first so extreme moduli do not overflow.
    let dir = match g.orientation {
        StepOrientation::InverseModulus => {
            let m = moduli.iter().copied().fold(f64::INFINITY, f64::min);
            moduli.map(|k| m / k)
        }
        StepOrientation::Modulus => {
            let m = moduli.iter().copied().fold(0.0, f64::max);
            moduli.map(|k| k / m)
        }
    };
    let u_min = dir.iter().copied().fold(f64::INFINITY, f64::min);
    let u_max = dir.iter().copied().fold(0.0, f64::max);
    let lambda = u_min / (u_max * u_max * g.step_scale * smoothness / 2.0);
    StepVector::new(dir.map(|u| lambda * u))
}

/// Outcome of one line search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    pub eta: StepVector,
    pub shrinks: usize,
    /// Projected gradient at `x` under the accepted step.
    pub projected_gradient: Vec3,
}

/// Shrinks `eta0` by `τ` until the acceptance test holds at `x`.
///
/// `fx` and `grad` are the objective value and gradient at `x`; the search
/// itself only evaluates function values. Normalized trial points are
/// clamped into the box before evaluation.
pub fn line_search<O: Objective + ?Sized>(
    obj: &O,
    x: &Vec3,
    fx: f64,
    grad: &Vec3,
    eta0: &StepVector,
    b: &FeasibleBox,
    cfg: &LineSearchConfig,
) -> Result<LineSearchOutcome> {
    let mut eta = *eta0;
    let mut g_proj = projected_gradient(grad, x, &eta, b);
    if linalg::norm(&g_proj) < DIRECTION_GUARD {
        return Ok(LineSearchOutcome {
            eta,
            shrinks: 0,
            projected_gradient: g_proj,
        });
    }
    for shrinks in 0..=cfg.max_shrinks {
        let gn = linalg::norm(&g_proj);
        let step = linalg::hadamard(&eta.0, &g_proj);
        let accepted = if gn < DIRECTION_GUARD {
            true
        } else if cfg.classic_armijo {
            let trial = linalg::sub(x, &step);
            obj.value(&trial)? <= fx - cfg.armijo_beta * linalg::dot(grad, &step)
        } else {
            let trial = project(b, &linalg::sub(x, &linalg::scale(&step, 1.0 / gn)));
            obj.value(&trial)? <= fx + cfg.armijo_beta * linalg::norm(&step)
        };
        if accepted {
            return Ok(LineSearchOutcome {
                eta,
                shrinks,
                projected_gradient: g_proj,
            });
        }
        if shrinks == cfg.max_shrinks {
            break;
        }
        eta = StepVector(linalg::hadamard(&eta.0, &cfg.shrink));
        g_proj = projected_gradient(grad, x, &eta, b);
    }
    STALLS.fetch_add(1, Ordering::Relaxed);
    Err(Error::LineSearchStalled {
        iteration: 0,
        shrinks: cfg.max_shrinks,
    })
}
