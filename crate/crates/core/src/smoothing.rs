//! Sliding-window follow-the-leader objective.
//!
//! `F(x) = (1/w) Σ_{i<w} Ψ^{n-i}(x)` with losses before the first sample taken
//! as zero, so early windows are divided by `w`, not by the number of terms.

use std::cell::Cell;
use std::collections::VecDeque;

use crate::ade::{self, Observation, RiverParams, SourceEstimate};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat3, Vec3};

/// A differentiable objective on the three-dimensional decision space.
pub trait Objective {
    fn value(&self, x: &Vec3) -> Result<f64>;

    fn gradient(&self, x: &Vec3) -> Result<Vec3>;

    /// Symmetrized finite-difference Jacobian of `gradient`.
    fn hessian(&self, x: &Vec3) -> Result<Mat3> {
        Ok(linalg::symmetrize(&ade::jacobian_fd(x, |y| self.gradient(y))?))
    }

    /// Cumulative number of per-term gradient evaluations.
    fn gradient_calls(&self) -> u64 {
        0
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn value(&self, x: &Vec3) -> Result<f64> {
        (**self).value(x)
    }
    fn gradient(&self, x: &Vec3) -> Result<Vec3> {
        (**self).gradient(x)
    }
    fn hessian(&self, x: &Vec3) -> Result<Mat3> {
        (**self).hessian(x)
    }
    fn gradient_calls(&self) -> u64 {
        (**self).gradient_calls()
    }
}

/// Objective built from plain closures, counting gradient calls.
pub struct FnObjective<F, G> {
    value: F,
    gradient: G,
    calls: Cell<u64>,
}

impl<F, G> FnObjective<F, G>
where
    F: Fn(&Vec3) -> f64,
    G: Fn(&Vec3) -> Vec3,
{
    pub fn new(value: F, gradient: G) -> Self {
        FnObjective {
            value,
            gradient,
            calls: Cell::new(0),
        }
    }
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&Vec3) -> f64,
    G: Fn(&Vec3) -> Vec3,
{
    fn value(&self, x: &Vec3) -> Result<f64> {
        Ok((self.value)(x))
    }

    fn gradient(&self, x: &Vec3) -> Result<Vec3> {
        self.calls.set(self.calls.get() + 1);
        Ok((self.gradient)(x))
    }

    fn hessian(&self, x: &Vec3) -> Result<Mat3> {
        Ok(linalg::symmetrize(&ade::jacobian_fd(x, |y| Ok((self.gradient)(y)))?))
    }

    fn gradient_calls(&self) -> u64 {
        self.calls.get()
    }
}

/// Window objective over a fixed set of loss terms.
#[derive(Debug, Clone)]
pub struct WindowObjective {
    terms: Vec<Observation>,
    window: usize,
    params: RiverParams,
    calls: Cell<u64>,
}

impl WindowObjective {
    pub fn new(terms: Vec<Observation>, window: usize, params: RiverParams) -> Self {
        WindowObjective {
            terms,
            window: window.max(1),
            params,
            calls: Cell::new(0),
        }
    }

    pub fn terms(&self) -> &[Observation] {
        &self.terms
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn params(&self) -> &RiverParams {
        &self.params
    }

    fn inv_w(&self) -> f64 {
        1.0 / self.window as f64
    }
}

impl Objective for WindowObjective {
    fn value(&self, x: &Vec3) -> Result<f64> {
        let mut acc = 0.0;
        for o in &self.terms {
            acc += ade::loss_at(x, o, &self.params)?;
        }
        Ok(acc * self.inv_w())
    }

    fn gradient(&self, x: &Vec3) -> Result<Vec3> {
        let mut acc = [0.0; 3];
        for o in &self.terms {
            acc = linalg::add(&acc, &ade::loss_gradient_at(x, o, &self.params)?);
        }
        self.calls.set(self.calls.get() + self.terms.len() as u64);
        Ok(linalg::scale(&acc, self.inv_w()))
    }

    fn hessian(&self, x: &Vec3) -> Result<Mat3> {
        let est = SourceEstimate::from_array(*x);
        let mut acc = [[0.0; 3]; 3];
        for o in &self.terms {
            acc = linalg::mat_add(&acc, &ade::loss_hessian(&est, o, &self.params)?);
        }
        Ok(linalg::mat_scale(&acc, self.inv_w()))
    }

    fn gradient_calls(&self) -> u64 {
        self.calls.get()
    }
}

/// Streaming record of observations for one online run.
#[derive(Debug, Clone)]
pub struct LossHistory {
    window: usize,
    recent: VecDeque<Observation>,
    seen: Vec<Observation>,
    keep_all: bool,
    n: usize,
}

impl LossHistory {
    /// `keep_all` retains every observation (needed by multi-start selection).
    pub fn new(window: usize, keep_all: bool) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidParameter("window must be at least 1".into()));
        }
        Ok(LossHistory {
            window,
            recent: VecDeque::with_capacity(window),
            seen: Vec::new(),
            keep_all,
            n: 0,
        })
    }

    pub fn push(&mut self, o: Observation) {
        if self.recent.len() == self.window {
            self.recent.pop_front();
        }
        self.recent.push_back(o);
        if self.keep_all {
            self.seen.push(o);
        }
        self.n += 1;
    }

    /// Number of observations ingested so far.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Observations in the current window, oldest first.
    pub fn recent(&self) -> impl Iterator<Item = &Observation> {
        self.recent.iter()
    }

    /// All observations seen so far; empty unless `keep_all` was set.
    pub fn seen(&self) -> &[Observation] {
        &self.seen
    }

    pub fn objective(&self, params: RiverParams) -> WindowObjective {
        WindowObjective::new(self.recent.iter().copied().collect(), self.window, params)
    }

    pub fn window_eval(&self, x: &SourceEstimate, p: &RiverParams) -> Result<f64> {
        self.objective(*p).value(&x.to_array())
    }

    pub fn window_gradient(&self, x: &SourceEstimate, p: &RiverParams) -> Result<Vec3> {
        self.objective(*p).gradient(&x.to_array())
    }

    pub fn window_hessian(&self, x: &SourceEstimate, p: &RiverParams) -> Result<Mat3> {
        self.objective(*p).hessian(&x.to_array())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(t: f64, c: f64) -> Observation {
        Observation {
            sensor_id: 0,
            sensor_location: 0.0,
            sample_time: t,
            concentration: c,
        }
    }

    fn x() -> SourceEstimate {
        SourceEstimate::new(1300.0, -22106.0, -215.0)
    }

    #[test]
    fn early_window_divides_by_w() {
        let p = RiverParams::truckee();
        let o1 = obs(60.0, 1e-4);
        let mut h = LossHistory::new(2, false).unwrap();
        h.push(o1);
        let f = h.window_eval(&x(), &p).unwrap();
        let psi = ade::loss(&x(), &o1, &p).unwrap();
        assert!((f - psi / 2.0).abs() <= 1e-15 * psi);
    }

    #[test]
    fn window_of_one_and_two() {
        let p = RiverParams::truckee();
        let (o1, o2) = (obs(60.0, 1e-4), obs(70.0, 3e-4));
        let mut h1 = LossHistory::new(1, false).unwrap();
        let mut h2 = LossHistory::new(2, false).unwrap();
        for o in [o1, o2] {
            h1.push(o);
            h2.push(o);
        }
        let p1 = ade::loss(&x(), &o1, &p).unwrap();
        let p2 = ade::loss(&x(), &o2, &p).unwrap();
        assert_eq!(h1.window_eval(&x(), &p).unwrap(), p2);
        assert!((h2.window_eval(&x(), &p).unwrap() - 0.5 * (p1 + p2)).abs() < 1e-20);
        assert_eq!(
            h1.window_gradient(&x(), &p).unwrap(),
            ade::loss_gradient(&x(), &o2, &p).unwrap()
        );
        assert_eq!(h1.window_hessian(&x(), &p).unwrap(), ade::loss_hessian(&x(), &o2, &p).unwrap());
    }

    #[test]
    fn gradient_calls_count_terms() {
        let p = RiverParams::truckee();
        let mut h = LossHistory::new(3, true).unwrap();
        for i in 0..5 {
            h.push(obs(60.0 + i as f64, 1e-4));
        }
        let obj = h.objective(p);
        obj.gradient(&x().to_array()).unwrap();
        obj.gradient(&x().to_array()).unwrap();
        assert_eq!(obj.gradient_calls(), 6);
        assert_eq!(h.seen().len(), 5);
        assert_eq!(h.recent().count(), 3);
    }

    #[test]
    fn zero_window_rejected() {
        assert!(LossHistory::new(0, false).is_err());
    }
}
