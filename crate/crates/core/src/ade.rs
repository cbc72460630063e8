//! Closed-form advection–dispersion forward model for an instantaneous point
//! release, and the squared-residual loss built on top of it.
//!
//! Units follow the river configuration: lengths in metres, times in minutes.
//! Mass and concentration units are whatever the caller uses consistently;
//! `unit_factor` converts model output (mass units per m³) into the
//! concentration unit of the observations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FeasibleBox;
use crate::linalg::{self, Mat3, Vec3};

/// Minimum elapsed time between release and sampling, in minutes.
pub const ELAPSED_TIME_GUARD: f64 = 1e-6;

/// Physical constants of the river reach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiverParams {
    /// Cross-section area A (m²).
    pub cross_section_area: f64,
    /// Longitudinal dispersion D (m²/min).
    pub dispersion: f64,
    /// Mean velocity v (m/min).
    pub velocity: f64,
    /// First-order decay k (1/min).
    pub decay: f64,
    /// Concentration units per (mass unit / m³).
    #[serde(default = "one")]
    pub unit_factor: f64,
}

fn one() -> f64 {
    1.0
}

impl RiverParams {
    pub fn new(cross_section_area: f64, dispersion: f64, velocity: f64, decay: f64) -> Result<Self> {
        let p = RiverParams {
            cross_section_area,
            dispersion,
            velocity,
            decay,
            unit_factor: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// Truckee River travel-time study constants.
    pub fn truckee() -> Self {
        RiverParams {
            cross_section_area: 60.0,
            dispersion: 2430.0,
            velocity: 80.0,
            decay: 1e-8,
            unit_factor: 1.0,
        }
    }

    pub fn with_unit_factor(mut self, factor: f64) -> Self {
        self.unit_factor = factor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.cross_section_area > 0.0
            && self.dispersion > 0.0
            && self.velocity > 0.0
            && self.decay >= 0.0
            && self.unit_factor > 0.0
            && [self.cross_section_area, self.dispersion, self.velocity, self.decay, self.unit_factor]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("river parameters {self:?}")))
        }
    }
}

/// Decision vector: released mass, release location and release time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceEstimate {
    pub mass: f64,
    pub location: f64,
    pub release_time: f64,
}

impl SourceEstimate {
    pub fn new(mass: f64, location: f64, release_time: f64) -> Self {
        SourceEstimate {
            mass,
            location,
            release_time,
        }
    }

    pub fn to_array(self) -> Vec3 {
        [self.mass, self.location, self.release_time]
    }

    pub fn from_array(x: Vec3) -> Self {
        SourceEstimate::new(x[0], x[1], x[2])
    }

    pub fn is_finite(&self) -> bool {
        linalg::is_finite(&self.to_array())
    }

    /// Componentwise relative error against a reference source.
    pub fn relative_error(&self, truth: &SourceEstimate) -> Vec3 {
        let a = self.to_array();
        let b = truth.to_array();
        [0, 1, 2].map(|i| ((a[i] - b[i]) / b[i]).abs())
    }
}

impl From<Vec3> for SourceEstimate {
    fn from(x: Vec3) -> Self {
        SourceEstimate::from_array(x)
    }
}

/// One concentration sample taken by a sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub sensor_id: u32,
    pub sensor_location: f64,
    pub sample_time: f64,
    pub concentration: f64,
}

/// Empirical regularity moduli of the loss over a feasible box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessConstants {
    /// κ: Lipschitz modulus of the loss.
    pub lipschitz_loss: f64,
    /// β: Lipschitz modulus of the loss gradient.
    pub lipschitz_grad: f64,
    /// ι: Lipschitz modulus of the loss Hessian.
    pub lipschitz_hessian: f64,
    /// B: bound on the loss.
    pub loss_bound: f64,
    /// σ: Lipschitz modulus of the residual.
    pub lipschitz_residual: f64,
    /// γ: Lipschitz modulus of the residual gradient.
    pub lipschitz_residual_grad: f64,
}

struct Plume {
    elapsed: f64,
    offset: f64,
    /// Concentration per unit mass.
    unit_value: f64,
}

fn plume(x: &Vec3, l_m: f64, t_obs: f64, p: &RiverParams) -> Result<Plume> {
    let elapsed = t_obs - x[2];
    if !(elapsed >= ELAPSED_TIME_GUARD) {
        return Err(Error::ElapsedTimeNonPositive {
            elapsed,
            guard: ELAPSED_TIME_GUARD,
        });
    }
    let d = p.dispersion;
    let offset = l_m - x[1] - p.velocity * elapsed;
    let prefactor = p.unit_factor
        / (p.cross_section_area * (4.0 * std::f64::consts::PI * d * elapsed).sqrt());
    let exponent = -offset * offset / (4.0 * d * elapsed) - p.decay * elapsed;
    Ok(Plume {
        elapsed,
        offset,
        unit_value: prefactor * exponent.exp(),
    })
}

/// Predicted concentration at `l_m` and time `t_obs` for the source `x`.
pub fn ade_concentration(x: &SourceEstimate, l_m: f64, t_obs: f64, p: &RiverParams) -> Result<f64> {
    let x = x.to_array();
    Ok(x[0] * plume(&x, l_m, t_obs, p)?.unit_value)
}

/// Gradient of the predicted concentration with respect to (s, l, t).
pub fn concentration_gradient(x: &Vec3, l_m: f64, t_obs: f64, p: &RiverParams) -> Result<Vec3> {
    let pl = plume(x, l_m, t_obs, p)?;
    let d = p.dispersion;
    let c = x[0] * pl.unit_value;
    let dt = pl.elapsed;
    let spread = l_m - x[1];
    Ok([
        pl.unit_value,
        c * 2.0 * pl.offset / (4.0 * d * dt),
        c * (0.5 / dt - spread * spread / (4.0 * d * dt * dt)
            + p.velocity * p.velocity / (4.0 * d)
            + p.decay),
    ])
}

/// Predicted minus observed concentration. Positive means overestimated.
pub fn residual(x: &SourceEstimate, o: &Observation, p: &RiverParams) -> Result<f64> {
    Ok(ade_concentration(x, o.sensor_location, o.sample_time, p)? - o.concentration)
}

pub fn loss(x: &SourceEstimate, o: &Observation, p: &RiverParams) -> Result<f64> {
    let r = residual(x, o, p)?;
    Ok(r * r)
}

pub(crate) fn loss_at(x: &Vec3, o: &Observation, p: &RiverParams) -> Result<f64> {
    let pl = plume(x, o.sensor_location, o.sample_time, p)?;
    let r = x[0] * pl.unit_value - o.concentration;
    Ok(r * r)
}

pub(crate) fn loss_gradient_at(x: &Vec3, o: &Observation, p: &RiverParams) -> Result<Vec3> {
    let pl = plume(x, o.sensor_location, o.sample_time, p)?;
    let r = x[0] * pl.unit_value - o.concentration;
    let g = concentration_gradient(x, o.sensor_location, o.sample_time, p)?;
    Ok(linalg::scale(&g, 2.0 * r))
}

/// Analytic gradient of the squared residual: `2·r·∇C`.
pub fn loss_gradient(x: &SourceEstimate, o: &Observation, p: &RiverParams) -> Result<Vec3> {
    loss_gradient_at(&x.to_array(), o, p)
}

/// Per-axis central-difference step used for Hessians.
pub fn hessian_step(x: &Vec3) -> Vec3 {
    x.map(|v| 1e-4 * (1.0 + v.abs()))
}

/// Jacobian of a vector field by central differences with steps `hessian_step`,
/// falling back to a one-sided difference when the forward point is rejected.
/// Returned unsymmetrized.
pub fn jacobian_fd<F>(x: &Vec3, mut field: F) -> Result<Mat3>
where
    F: FnMut(&Vec3) -> Result<Vec3>,
{
    let h = hessian_step(x);
    let mut cols = [[0.0; 3]; 3];
    for j in 0..3 {
        let mut fwd = *x;
        fwd[j] += h[j];
        let mut bwd = *x;
        bwd[j] -= h[j];
        let col = match field(&fwd) {
            Ok(gf) => {
                let gb = field(&bwd)?;
                linalg::scale(&linalg::sub(&gf, &gb), 0.5 / h[j])
            }
            Err(Error::ElapsedTimeNonPositive { .. }) => {
                let g0 = field(x)?;
                let gb = field(&bwd)?;
                linalg::scale(&linalg::sub(&g0, &gb), 1.0 / h[j])
            }
            Err(e) => return Err(e),
        };
        cols[j] = col;
    }
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = cols[j][i];
        }
    }
    Ok(m)
}

/// Hessian of the loss before symmetrization.
pub fn loss_hessian_raw(x: &SourceEstimate, o: &Observation, p: &RiverParams) -> Result<Mat3> {
    jacobian_fd(&x.to_array(), |y| loss_gradient_at(y, o, p))
}

/// Symmetrized finite-difference Hessian of the loss.
pub fn loss_hessian(x: &SourceEstimate, o: &Observation, p: &RiverParams) -> Result<Mat3> {
    Ok(linalg::symmetrize(&loss_hessian_raw(x, o, p)?))
}

/// Evenly spaced grid including both endpoints.
pub(crate) fn axis_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k <= 1 || hi == lo {
        return vec![0.5 * (lo + hi)];
    }
    (0..k)
        .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
        .collect()
}

pub(crate) fn box_grid(b: &FeasibleBox, k: usize) -> Vec<Vec3> {
    let s = axis_grid(b.mass_range.lo, b.mass_range.hi, k);
    let l = axis_grid(b.location_range.lo, b.location_range.hi, k);
    let t = axis_grid(b.time_range.lo, b.time_range.hi, k);
    let mut out = Vec::with_capacity(s.len() * l.len() * t.len());
    for &si in &s {
        for &li in &l {
            for &ti in &t {
                out.push([si, li, ti]);
            }
        }
    }
    out
}

impl SmoothnessConstants {
    /// Estimates every modulus by sampling a `k³` grid of the box for each
    /// observation. Lipschitz moduli of gradients and Hessians are taken as
    /// the largest spectral norm of the next derivative on the grid, and the
    /// Hessian modulus from difference quotients between neighbouring grid
    /// points. Values are inflated by 1% and floored at `f64::MIN_POSITIVE`.
    pub fn estimate(obs: &[Observation], b: &FeasibleBox, p: &RiverParams, k: usize) -> Result<Self> {
        let k = k.max(2);
        let grid = box_grid(b, k);
        let mut kappa: f64 = 0.0;
        let mut beta: f64 = 0.0;
        let mut iota: f64 = 0.0;
        let mut bound: f64 = 0.0;
        let mut sigma: f64 = 0.0;
        let mut gamma: f64 = 0.0;
        let idx = |i: usize, j: usize, l: usize| (i * k + j) * k + l;
        for o in obs {
            let mut hess = Vec::with_capacity(grid.len());
            for x in &grid {
                bound = bound.max(loss_at(x, o, p)?);
                kappa = kappa.max(linalg::norm(&loss_gradient_at(x, o, p)?));
                let cg = concentration_gradient(x, o.sensor_location, o.sample_time, p)?;
                sigma = sigma.max(linalg::norm(&cg));
                let ch = jacobian_fd(x, |y| concentration_gradient(y, o.sensor_location, o.sample_time, p))?;
                gamma = gamma.max(linalg::symmetric_spectral_norm(&linalg::symmetrize(&ch)));
                let h = linalg::symmetrize(&jacobian_fd(x, |y| loss_gradient_at(y, o, p))?);
                beta = beta.max(linalg::symmetric_spectral_norm(&h));
                hess.push(h);
            }
            for i in 0..k {
                for j in 0..k {
                    for l in 0..k {
                        let a = idx(i, j, l);
                        for (di, dj, dl) in [(1, 0, 0), (0, 1, 0), (0, 0, 1)] {
                            let (ni, nj, nl) = (i + di, j + dj, l + dl);
                            if ni >= k || nj >= k || nl >= k {
                                continue;
                            }
                            let bidx = idx(ni, nj, nl);
                            let diff = linalg::mat_add(&hess[a], &linalg::mat_scale(&hess[bidx], -1.0));
                            let dist = linalg::norm(&linalg::sub(&grid[a], &grid[bidx]));
                            if dist > 0.0 {
                                iota = iota.max(linalg::symmetric_spectral_norm(&diff) / dist);
                            }
                        }
                    }
                }
            }
        }
        let inflate = |v: f64| (1.01 * v).max(f64::MIN_POSITIVE);
        Ok(SmoothnessConstants {
            lipschitz_loss: inflate(kappa),
            lipschitz_grad: inflate(beta),
            lipschitz_hessian: inflate(iota),
            loss_bound: inflate(bound),
            lipschitz_residual: inflate(sigma),
            lipschitz_residual_grad: inflate(gamma),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_params(decay: f64) -> RiverParams {
        RiverParams::new(1.0, 1.0 / (4.0 * std::f64::consts::PI), 3.0, decay).unwrap()
    }

    #[test]
    fn unit_prefactor_zero_mismatch() {
        let p = unit_params(0.0);
        let x = SourceEstimate::new(2.0, 0.0, 0.0);
        let c = ade_concentration(&x, p.velocity, 1.0, &p).unwrap();
        assert!((c - 2.0).abs() < 1e-14);
    }

    #[test]
    fn decay_halves_over_unit_time() {
        let p = unit_params(std::f64::consts::LN_2);
        let x = SourceEstimate::new(2.0, 0.0, 0.0);
        let c = ade_concentration(&x, p.velocity, 1.0, &p).unwrap();
        assert!((c - 1.0).abs() < 1e-14);
    }

    #[test]
    fn truckee_point_values() {
        // Frozen from a direct scalar evaluation of the closed form.
        let p = RiverParams::truckee();
        let x = SourceEstimate::new(1300.0, -22106.0, -215.0);
        let c = ade_concentration(&x, 0.0, 100.0, &p).unwrap();
        assert!((c - 3.064706648630677e-4).abs() < 1e-15);
        let o = Observation {
            sensor_id: 0,
            sensor_location: 0.0,
            sample_time: 100.0,
            concentration: 5e-4,
        };
        let r = residual(&x, &o, &p).unwrap();
        assert!((r + 1.9352933513693232e-4).abs() < 1e-15);
        let l = loss(&x, &o, &p).unwrap();
        assert!((l - 3.745360355854307e-8).abs() < 1e-18);
    }

    #[test]
    fn guard_rejects_nonpositive_elapsed_time() {
        let p = RiverParams::truckee();
        let x = SourceEstimate::new(1.0, 0.0, 10.0);
        for t in [10.0, 9.0, 10.0 + 1e-7] {
            assert!(matches!(
                ade_concentration(&x, 0.0, t, &p),
                Err(Error::ElapsedTimeNonPositive { .. })
            ));
        }
        assert!(ade_concentration(&x, 0.0, 10.0 + 2e-6, &p).is_ok());
    }

    #[test]
    fn zero_mass_predicts_zero() {
        let p = RiverParams::truckee();
        let o = Observation {
            sensor_id: 1,
            sensor_location: 100.0,
            sample_time: 5.0,
            concentration: 0.0,
        };
        let x = SourceEstimate::new(0.0, 0.0, 0.0);
        assert_eq!(residual(&x, &o, &p).unwrap(), 0.0);
    }

    #[test]
    fn gradient_vanishes_at_zero_residual() {
        let p = RiverParams::truckee();
        let x = SourceEstimate::new(1300.0, -22106.0, -215.0);
        let c = ade_concentration(&x, 0.0, 100.0, &p).unwrap();
        let o = Observation {
            sensor_id: 0,
            sensor_location: 0.0,
            sample_time: 100.0,
            concentration: c,
        };
        assert_eq!(loss_gradient(&x, &o, &p).unwrap(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn mass_derivative_sign_at_zero_mass() {
        let p = RiverParams::truckee();
        let x = SourceEstimate::new(0.0, -22106.0, -215.0);
        let o = Observation {
            sensor_id: 0,
            sensor_location: 0.0,
            sample_time: 100.0,
            concentration: 2e-4,
        };
        let g = loss_gradient(&x, &o, &p).unwrap();
        let unit = ade_concentration(&SourceEstimate::new(1.0, -22106.0, -215.0), 0.0, 100.0, &p).unwrap();
        assert!(g[0] < 0.0);
        assert!((g[0] - 2.0 * (-2e-4) * unit).abs() < 1e-20);
    }

    #[test]
    fn loss_even_in_residual() {
        let p = RiverParams::truckee();
        let x = SourceEstimate::new(1300.0, -22106.0, -215.0);
        let c = ade_concentration(&x, 0.0, 100.0, &p).unwrap();
        let r = 1e-4;
        let mk = |conc| Observation {
            sensor_id: 0,
            sensor_location: 0.0,
            sample_time: 100.0,
            concentration: conc,
        };
        let a = loss(&x, &mk(c - r), &p).unwrap();
        let b = loss(&x, &mk(c + r), &p).unwrap();
        assert!((a - b).abs() <= 1e-12 * a);
    }
}
