//! Axis-aligned feasible set and the vector-step projected gradient.

use serde::{Deserialize, Serialize};

use crate::ade::{Observation, ELAPSED_TIME_GUARD};
use crate::error::{Error, Result};
use crate::linalg::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

/// Box `S × L × T` of admissible (mass, location, release time).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleBox {
    pub mass_range: Interval,
    pub location_range: Interval,
    pub time_range: Interval,
}

impl FeasibleBox {
    pub fn new(mass: (f64, f64), location: (f64, f64), time: (f64, f64)) -> Result<Self> {
        let b = FeasibleBox {
            mass_range: Interval::new(mass.0, mass.1),
            location_range: Interval::new(location.0, location.1),
            time_range: Interval::new(time.0, time.1),
        };
        b.validate()?;
        Ok(b)
    }

    pub fn axes(&self) -> [Interval; 3] {
        [self.mass_range, self.location_range, self.time_range]
    }

    pub fn lower(&self) -> Vec3 {
        self.axes().map(|a| a.lo)
    }

    pub fn upper(&self) -> Vec3 {
        self.axes().map(|a| a.hi)
    }

    pub fn widths(&self) -> Vec3 {
        self.axes().map(|a| a.width())
    }

    pub fn center(&self) -> Vec3 {
        self.axes().map(|a| 0.5 * (a.lo + a.hi))
    }

    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.axes().iter().enumerate() {
            if !(a.lo.is_finite() && a.hi.is_finite() && a.lo <= a.hi) {
                return Err(Error::InvalidParameter(format!(
                    "box axis {i}: [{}, {}]",
                    a.lo, a.hi
                )));
            }
        }
        Ok(())
    }

    /// Checks that every admissible release time precedes every sample by at
    /// least the elapsed-time guard.
    pub fn validate_for(&self, obs: &[Observation]) -> Result<()> {
        self.validate()?;
        if let Some(first) = obs.iter().map(|o| o.sample_time).reduce(f64::min) {
            if self.time_range.hi > first - ELAPSED_TIME_GUARD {
                return Err(Error::InvalidParameter(format!(
                    "release-time upper bound {} is not before the first sample at {}",
                    self.time_range.hi, first
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        self.axes()
            .iter()
            .zip(x)
            .all(|(a, v)| *v >= a.lo && *v <= a.hi)
    }
}

/// Per-dimension step sizes (η_s, η_l, η_t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepVector(pub Vec3);

impl StepVector {
    pub fn new(eta: Vec3) -> Result<Self> {
        if eta.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(StepVector(eta))
        } else {
            Err(Error::InvalidParameter(format!("step sizes must be positive: {eta:?}")))
        }
    }

    pub fn uniform(eta: f64) -> Result<Self> {
        StepVector::new([eta; 3])
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    pub fn as_array(&self) -> Vec3 {
        self.0
    }
}

/// Euclidean projection onto the box (componentwise clamp).
pub fn project(b: &FeasibleBox, x: &Vec3) -> Vec3 {
    let axes = b.axes();
    [axes[0].clamp(x[0]), axes[1].clamp(x[1]), axes[2].clamp(x[2])]
}

/// `(x − Π[x − η⊗grad]) ⊘ η`.
pub fn projected_gradient(grad: &Vec3, x: &Vec3, eta: &StepVector, b: &FeasibleBox) -> Vec3 {
    let e = eta.0;
    let moved = [x[0] - e[0] * grad[0], x[1] - e[1] * grad[1], x[2] - e[2] * grad[2]];
    let p = project(b, &moved);
    [(x[0] - p[0]) / e[0], (x[1] - p[1]) / e[1], (x[2] - p[2]) / e[2]]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> FeasibleBox {
        FeasibleBox::new((0.0, 1.0), (0.0, 1.0), (0.0, 1.0)).unwrap()
    }

    #[test]
    fn clamp_and_identity() {
        let b = unit_box();
        assert_eq!(project(&b, &[2.0, -1.0, 0.5]), [1.0, 0.0, 0.5]);
        assert_eq!(project(&b, &[0.2, 0.3, 0.4]), [0.2, 0.3, 0.4]);
    }

    #[test]
    fn inactive_projection_returns_gradient() {
        let b = unit_box();
        let g = [0.3, -0.7, 1.1];
        let eta = StepVector::uniform(1e-3).unwrap();
        let pg = projected_gradient(&g, &[0.5, 0.5, 0.5], &eta, &b);
        for i in 0..3 {
            assert!((pg[i] - g[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn binding_bound_annihilates_outward_motion() {
        let b = unit_box();
        let eta = StepVector::uniform(0.1).unwrap();
        // at s = s_hi, a negative gradient pushes s upward and out of the box
        let pg = projected_gradient(&[-5.0, 0.0, 0.0], &[1.0, 0.5, 0.5], &eta, &b);
        assert_eq!(pg[0], 0.0);
    }

    #[test]
    fn rejects_inverted_interval_and_late_release() {
        assert!(FeasibleBox::new((1.0, 0.0), (0.0, 1.0), (0.0, 1.0)).is_err());
        let b = FeasibleBox::new((0.0, 1.0), (0.0, 1.0), (-10.0, 5.0)).unwrap();
        let o = Observation {
            sensor_id: 0,
            sensor_location: 0.0,
            sample_time: 5.0,
            concentration: 0.0,
        };
        assert!(b.validate_for(&[o]).is_err());
        let b = FeasibleBox::new((0.0, 1.0), (0.0, 1.0), (-10.0, 4.0)).unwrap();
        assert!(b.validate_for(&[o]).is_ok());
    }

    #[test]
    fn nonpositive_steps_rejected() {
        assert!(StepVector::new([1.0, 0.0, 1.0]).is_err());
        assert!(StepVector::new([1.0, -1.0, 1.0]).is_err());
    }
}
