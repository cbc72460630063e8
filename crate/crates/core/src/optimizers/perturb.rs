use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project, FeasibleBox};
use crate::linalg::{self, Vec3};

/// Dimension of the decision space.
pub const DIM: usize = 3;

/// Derived thresholds of the perturbed variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    pub c: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub delta_f: f64,
    pub kappa: f64,
    pub iota: f64,
    pub chi: f64,
    pub radius: f64,
    pub g_thres: f64,
    pub f_thres: f64,
    pub t_thres: u64,
    pub t_noise_init: i64,
}

/// χ = 3·max{ln(dκΔf/(cδ²ε)), 4} and the thresholds that follow from it.
pub fn aptgd_params(c: f64, epsilon: f64, delta: f64, delta_f: f64, kappa: f64, iota: f64) -> Result<PerturbConfig> {
    let positive = [c, epsilon, delta, delta_f, kappa, iota]
        .iter()
        .all(|v| *v > 0.0 && v.is_finite());
    if !positive || c > 1.0 || epsilon >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "perturbation parameters c={c} ε={epsilon} δ={delta} Δf={delta_f} κ={kappa} ι={iota}"
        )));
    }
    let d = DIM as f64;
    let chi = 3.0 * (d * kappa * delta_f / (c * delta * delta * epsilon)).ln().max(4.0);
    let sqrt_c = c.sqrt();
    let t_thres = ((chi / (c * c)) * (kappa / (iota * delta).sqrt())).ceil();
    let t_thres = if t_thres >= u64::MAX as f64 { u64::MAX / 4 } else { (t_thres as u64).max(1) };
    Ok(PerturbConfig {
        c,
        epsilon,
        delta,
        delta_f,
        kappa,
        iota,
        chi,
        radius: sqrt_c / (chi * chi) * delta / kappa,
        g_thres: sqrt_c / (chi * chi) * delta,
        f_thres: c / chi.powi(3) * (delta.powi(3) / iota).sqrt(),
        t_thres,
        t_noise_init: -(t_thres.min(i64::MAX as u64 / 2) as i64) - 1,
    })
}

impl PerturbConfig {
    /// Inner-step cap `10·t_thres·(Δf/f_thres)`, saturating.
    pub fn default_budget(&self) -> u64 {
        let b = 10.0 * self.t_thres as f64 * (self.delta_f / self.f_thres);
        if b.is_finite() && b < u64::MAX as f64 {
            b.ceil() as u64
        } else {
            u64::MAX
        }
    }
}

/// Uniform draw from the 3-ball of radius `r`.
pub fn sample_ball<R: Rng + ?Sized>(r: f64, rng: &mut R) -> Vec3 {
    loop {
        let g: Vec3 = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let n = linalg::norm(&g);
        if n > 0.0 {
            let u: f64 = rng.random();
            let radius = r * u.cbrt();
            return linalg::scale(&g, radius / n);
        }
    }
}

/// `Π[x + ω]` with ω uniform on the ball of radius `r`.
pub fn perturb<R: Rng + ?Sized>(x: &Vec3, r: f64, b: &FeasibleBox, rng: &mut R) -> Vec3 {
    project(b, &linalg::add(x, &sample_ball(r, rng)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chi_floor() {
        let pc = aptgd_params(1.0, 0.5, 1.0, 1e-3, 1.0, 1.0).unwrap();
        assert_eq!(pc.chi, 12.0);
    }

    #[test]
    fn plug_in_thresholds() {
        // κΔf/(δ²ε) small enough that the log term stays below 4
        let pc = aptgd_params(1.0, 0.9, 1e-2, 1e-6, 1.0, 1.0).unwrap();
        assert_eq!(pc.chi, 12.0);
        assert!((pc.radius - 6.944444444444444e-5).abs() < 1e-18);
        assert_eq!(pc.t_thres, 120);
        assert_eq!(pc.t_noise_init, -121);
        assert!((pc.g_thres - 1e-2 / 144.0).abs() < 1e-18);
        assert!((pc.f_thres - (1e-6f64 / 1.0).sqrt() / 1728.0).abs() < 1e-18);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(aptgd_params(1.5, 0.1, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(aptgd_params(1.0, 0.1, 0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn ball_membership_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = 0.3;
        let n = 100_000;
        let mut sum = [0.0; 3];
        for _ in 0..n {
            let w = sample_ball(r, &mut rng);
            assert!(linalg::norm(&w) <= r);
            sum = linalg::add(&sum, &w);
        }
        // per-component variance of a uniform 3-ball is r²/5
        let se = (r * r / 5.0 / n as f64).sqrt();
        for s in sum {
            assert!((s / n as f64).abs() < 3.0 * se);
        }
    }

    #[test]
    fn seeded_draws_repeat() {
        let b = FeasibleBox::new((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)).unwrap();
        let a = perturb(&[0.0; 3], 0.5, &b, &mut ChaCha8Rng::seed_from_u64(3));
        let c = perturb(&[0.0; 3], 0.5, &b, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, c);
    }
}
