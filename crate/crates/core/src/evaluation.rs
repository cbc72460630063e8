//! Regret metrics, the offline optimum oracle and second-order checks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ade::{self, box_grid, Observation, RiverParams, SourceEstimate};
use crate::error::{Error, Result};
use crate::geometry::{project, projected_gradient, FeasibleBox, StepVector};
use crate::linalg::{self, Mat3, Vec3};
use crate::optimizers::{sample_ball, RunTrace};
use crate::smoothing::{LossHistory, Objective, WindowObjective};

/// Symmetry tolerance (Frobenius norm of `H − Hᵀ`).
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Which step enters the projected gradient of the local regret.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RegretStep {
    /// The step accepted at each iteration, as recorded in the trace.
    #[default]
    Accepted,
    Fixed { eta: Vec3 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalRegret {
    pub total: f64,
    pub per_iteration: Vec<f64>,
}

/// `Σ_n ‖∇_{F,η}F^n(x^n)‖²` recomputed from the stream.
pub fn local_regret(
    trace: &RunTrace,
    stream: &[Observation],
    w: usize,
    p: &RiverParams,
    b: &FeasibleBox,
    step: RegretStep,
) -> Result<LocalRegret> {
    let mut history = LossHistory::new(w, false)?;
    let mut per_iteration = Vec::with_capacity(trace.len());
    for (r, o) in trace.records.iter().zip(stream) {
        history.push(*o);
        let g = history.objective(*p).gradient(&r.x)?;
        let eta = match step {
            RegretStep::Accepted => StepVector(r.eta),
            RegretStep::Fixed { eta } => StepVector::new(eta)?,
        };
        let gp = projected_gradient(&g, &r.x, &eta, b);
        per_iteration.push(linalg::dot(&gp, &gp));
    }
    Ok(LocalRegret {
        total: per_iteration.iter().sum(),
        per_iteration,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub grid: usize,
    pub polish_starts: usize,
    pub polish_steps: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            grid: 50,
            polish_starts: 10,
            polish_steps: 2000,
        }
    }
}

/// Best point found for the summed loss. `value` bounds the true infimum
/// from above, so regrets computed against it are lower bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub argmin: SourceEstimate,
    pub value: f64,
    pub upper_bound: bool,
}

/// Summed (not averaged) loss over a fixed prefix.
struct SumObjective<'a> {
    terms: &'a [Observation],
    p: &'a RiverParams,
}

impl Objective for SumObjective<'_> {
    fn value(&self, x: &Vec3) -> Result<f64> {
        self.terms.iter().try_fold(0.0, |acc, o| Ok(acc + ade::loss_at(x, o, self.p)?))
    }

    fn gradient(&self, x: &Vec3) -> Result<Vec3> {
        self.terms
            .iter()
            .try_fold([0.0; 3], |acc, o| Ok(linalg::add(&acc, &ade::loss_gradient_at(x, o, self.p)?)))
    }
}

/// Projected gradient descent in the metric `diag(|H_ii|)⁻¹` with
/// backtracking on sufficient decrease.
fn polish<O: Objective>(obj: &O, x0: &Vec3, b: &FeasibleBox, steps: usize) -> Result<(Vec3, f64)> {
    let mut x = *x0;
    let mut fx = obj.value(&x)?;
    let widths = b.widths();
    for _ in 0..steps {
        let g = obj.gradient(&x)?;
        let h = obj.hessian(&x)?;
        let metric: Vec3 = std::array::from_fn(|i| {
            let d = h[i][i].abs();
            let cap = widths[i] * widths[i];
            if d > 0.0 {
                (1.0 / d).min(cap / fx.abs().max(f64::MIN_POSITIVE))
            } else {
                cap
            }
        });
        let mut alpha = 1.0;
        let mut moved = false;
        while alpha > 1e-20 {
            let trial = project(b, &linalg::sub(&x, &linalg::scale(&linalg::hadamard(&metric, &g), alpha)));
            let d = linalg::sub(&x, &trial);
            let ft = obj.value(&trial)?;
            if ft <= fx - 1e-4 * linalg::dot(&g, &d) && ft < fx {
                x = trial;
                fx = ft;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok((x, fx))
}

/// Grid scan of the summed loss followed by polishing from the best cells.
pub fn offline_oracle(
    stream: &[Observation],
    b: &FeasibleBox,
    p: &RiverParams,
    cfg: &OracleConfig,
) -> Result<OracleResult> {
    if stream.is_empty() {
        return Err(Error::TooFewSamples(0));
    }
    b.validate_for(stream)?;
    let obj = SumObjective { terms: stream, p };
    let mut scored: Vec<(f64, Vec3)> = box_grid(b, cfg.grid.max(2))
        .into_iter()
        .map(|x| Ok((obj.value(&x)?, x)))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = (scored[0].1, scored[0].0);
    for (_, x) in scored.iter().take(cfg.polish_starts.max(1)) {
        let (xp, fp) = polish(&obj, x, b, cfg.polish_steps)?;
        if fp < best.1 {
            best = (xp, fp);
        }
    }
    Ok(OracleResult {
        argmin: SourceEstimate::from_array(best.0),
        value: best.1,
        upper_bound: true,
    })
}

/// `Σ Ψ^n(x^n) − oracle` over the trace's prefix of `stream`.
pub fn cumulative_regret(trace: &RunTrace, stream: &[Observation], p: &RiverParams, oracle: &OracleResult) -> Result<f64> {
    let mut total = 0.0;
    for (r, o) in trace.records.iter().zip(stream) {
        total += ade::loss(&SourceEstimate::from_array(r.x), o, p)?;
    }
    Ok(total - oracle.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub local_regret: f64,
    pub cumulative_regret: f64,
    pub per_iteration: Vec<f64>,
    pub oracle_value: f64,
    pub oracle_argmin: SourceEstimate,
}

pub fn regret_report(
    trace: &RunTrace,
    stream: &[Observation],
    b: &FeasibleBox,
    p: &RiverParams,
    step: RegretStep,
    oracle: &OracleConfig,
) -> Result<RegretReport> {
    let prefix = &stream[..trace.len().min(stream.len())];
    let local = local_regret(trace, prefix, trace.config.window, p, b, step)?;
    let o = offline_oracle(prefix, b, p, oracle)?;
    Ok(RegretReport {
        local_regret: local.total,
        cumulative_regret: cumulative_regret(trace, prefix, p, &o)?,
        per_iteration: local.per_iteration,
        oracle_value: o.value,
        oracle_argmin: o.argmin,
    })
}

/// One point of a regret growth curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretPoint {
    pub n: usize,
    pub local_regret: f64,
    pub cumulative_regret: f64,
    pub oracle_value: f64,
}

/// Local and cumulative regret at each prefix length in `lengths`, with
/// a fresh oracle per prefix.
pub fn regret_curve(
    trace: &RunTrace,
    stream: &[Observation],
    b: &FeasibleBox,
    p: &RiverParams,
    lengths: &[usize],
    oracle: &OracleConfig,
) -> Result<Vec<RegretPoint>> {
    let local = local_regret(trace, stream, trace.config.window, p, b, RegretStep::Accepted)?;
    let mut out = Vec::with_capacity(lengths.len());
    let mut played = 0.0;
    let mut done = 0;
    for &n in lengths {
        let n = n.min(trace.len()).min(stream.len());
        for (r, o) in trace.records[done..n].iter().zip(&stream[done..n]) {
            played += ade::loss(&SourceEstimate::from_array(r.x), o, p)?;
        }
        done = done.max(n);
        let o = offline_oracle(&stream[..n], b, p, oracle)?;
        out.push(RegretPoint {
            n,
            local_regret: local.per_iteration[..n].iter().sum(),
            cumulative_regret: played - o.value,
            oracle_value: o.value,
        });
    }
    Ok(out)
}

/// Smallest eigenvalue of a symmetric 3×3 matrix.
pub fn min_eigenvalue(h: &Mat3) -> Result<f64> {
    let defect = linalg::asymmetry(h);
    if defect > SYMMETRY_TOLERANCE {
        return Err(Error::AsymmetricInput { defect });
    }
    Ok(linalg::symmetric_eigenvalues(&linalg::symmetrize(h))[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderCertificate {
    pub gradient_norm: f64,
    pub min_eig: f64,
    /// `−√(ι̂δ)`.
    pub curvature_floor: f64,
    pub pass: bool,
}

/// `‖∇F‖ ≤ δ` and `λ_min(∇²F) ≥ −√(ι̂δ)`. With `constraint`, the
/// projected gradient under that step replaces the plain gradient, which
/// is the stationarity measure on the box.
pub fn check_second_order<O: Objective + ?Sized>(
    x: &Vec3,
    obj: &O,
    delta: f64,
    iota_hat: f64,
    constraint: Option<(&FeasibleBox, &StepVector)>,
) -> Result<SecondOrderCertificate> {
    let g = obj.gradient(x)?;
    let g = match constraint {
        Some((b, eta)) => projected_gradient(&g, x, eta, b),
        None => g,
    };
    let gradient_norm = linalg::norm(&g);
    let min_eig = min_eigenvalue(&linalg::symmetrize(&obj.hessian(x)?))?;
    let curvature_floor = -(iota_hat * delta).sqrt();
    Ok(SecondOrderCertificate {
        gradient_norm,
        min_eig,
        curvature_floor,
        pass: gradient_norm <= delta && min_eig >= curvature_floor,
    })
}

/// Strict-saddle parameters; the tolerance follows as `min(θ, τ²/ι)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleParams {
    pub theta: f64,
    pub tau_strict: f64,
    pub zeta: f64,
    pub mu: f64,
}

impl SaddleParams {
    pub fn validate(&self) -> Result<()> {
        if self.theta > 0.0 && self.tau_strict > 0.0 && self.mu > 0.0 && self.zeta >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("saddle parameters {self:?}")))
        }
    }

    pub fn delta(&self, iota: f64) -> f64 {
        self.theta.min(self.tau_strict * self.tau_strict / iota)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundReport {
    pub mu_hat: f64,
    /// `μ̂θ`, the radius of the sampled ball.
    pub radius: f64,
    pub candidate_distance: f64,
    /// Every sampled Hessian is positive definite and the candidate lies
    /// inside the ball.
    pub holds_with_sampling: bool,
}

/// Estimates μ̂ from the Hessian at `minimum` and samples the μ̂θ-ball
/// around it for positive definiteness.
pub fn check_error_bound<O: Objective + ?Sized, R: Rng + ?Sized>(
    candidate: &Vec3,
    minimum: &Vec3,
    obj: &O,
    theta: f64,
    samples: usize,
    rng: &mut R,
) -> Result<ErrorBoundReport> {
    let mu_hat = min_eigenvalue(&linalg::symmetrize(&obj.hessian(minimum)?))?;
    if !(mu_hat > 0.0) {
        return Err(Error::NotLocallyConvex {
            point: *minimum,
            min_eig: mu_hat,
        });
    }
    let radius = mu_hat * theta;
    for _ in 0..samples {
        let y = linalg::add(minimum, &sample_ball(radius, rng));
        let l = min_eigenvalue(&linalg::symmetrize(&obj.hessian(&y)?))?;
        if !(l > 0.0) {
            return Err(Error::NotLocallyConvex { point: y, min_eig: l });
        }
    }
    let candidate_distance = linalg::norm(&linalg::sub(candidate, minimum));
    Ok(ErrorBoundReport {
        mu_hat,
        radius,
        candidate_distance,
        holds_with_sampling: candidate_distance <= radius,
    })
}

/// Window objective of the first `n` observations with window `w`.
pub fn window_at(stream: &[Observation], n: usize, w: usize, p: &RiverParams) -> WindowObjective {
    let lo = n.saturating_sub(w);
    WindowObjective::new(stream[lo..n].to_vec(), w, *p)
}
