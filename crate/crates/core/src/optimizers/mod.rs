//! Online optimizers: fixed-step, adaptive, perturbed, and multi-start.
//!
//! Every variant runs through one engine. A single-start run is a
//! multi-start run with one path, so `paths = 1` reproduces the plain
//! variant bit for bit.

pub mod perturb;
mod trace;

use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ade::{self, Observation, RiverParams, SmoothnessConstants};
use crate::error::{Error, Result};
use crate::geometry::{projected_gradient, FeasibleBox, StepVector};
use crate::linalg::{self, Vec3};
use crate::smoothing::{LossHistory, Objective, WindowObjective};
use crate::step_control::{
init_step_sizes, line_search, steps_from_moduli, GridConfig, LineSearchConfig};

pub use perturb::{aptgd_params, perturb, sample_ball, PerturbConfig};
pub use trace::{IterationRecord, PerturbEvent, RunTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Tgd,
    Atgd,
    Aptgd,
    Mtgd,
    Mptgd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Tgd,
        Algorithm::Atgd,
        Algorithm::Aptgd,
        Algorithm::Mtgd,
        Algorithm::Mptgd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Tgd => "tgd",
            Algorithm::Atgd => "atgd",
            Algorithm::Aptgd => "aptgd",
            Algorithm::Mtgd => "mtgd",
            Algorithm::Mptgd => "mptgd",
        }
    }

    fn epoch_kind(self) -> EpochKind {
        match self {
            Algorithm::Tgd => EpochKind::Fixed,
            Algorithm::Atgd | Algorithm::Mtgd => EpochKind::Adaptive,
            Algorithm::Aptgd | Algorithm::Mptgd => EpochKind::Perturbed,
        }
    }

    pub fn is_multistart(self) -> bool {
        matches!(self, Algorithm::Mtgd | Algorithm::Mptgd)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EpochKind {
    Fixed,
    Adaptive,
    Perturbed,
}

/// How multi-start paths are ranked after each observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Square of the mean residual over observations seen so far.
    #[default]
    SquaredMeanResidual,
    /// Mean of squared residuals.
    MeanSquaredResidual,
}

/// User-facing settings of the perturbed variant. Unset κ and ι track the
/// running maximum of per-window grid estimates; unset Δf is 1.5 times the
/// running maximum of the window objective at the played point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbSettings {
    pub c: f64,
    pub epsilon: f64,
    pub delta_f: Option<f64>,
    pub kappa: Option<f64>,
    pub iota: Option<f64>,
    /// Inner-iteration cap per epoch; defaults to `10·t_thres·(Δf/f_thres)`.
    pub epoch_budget: Option<u64>,
}

impl Default for PerturbSettings {
    fn default() -> Self {
        PerturbSettings {
            c: 1.0,
            epsilon: 0.1,
            delta_f: None,
            kappa: None,
            iota: None,
            epoch_budget: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub window: usize,
    /// Inner-loop tolerance δ.
    pub tolerance: f64,
    pub line_search: LineSearchConfig,
    pub grid: GridConfig,
    /// Scalar step of the fixed-step variant.
    pub fixed_eta: Option<f64>,
    pub multi_start: usize,
    pub seed: u64,
    /// Overrides the drawn start of path 0.
    pub start: Option<Vec3>,
    pub selection: SelectionRule,
    /// Hard cap on inner iterations per epoch for every variant.
    pub max_inner_steps: u64,
    pub perturbation: PerturbSettings,
    /// Keep objective values along each epoch's inner iterations.
    pub record_inner: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            window: 1,
            tolerance: 1e-4,
            line_search: LineSearchConfig::default(),
            grid: GridConfig::default(),
            fixed_eta: None,
            multi_start: 1,
            seed: 0,
            start: None,
            selection: SelectionRule::default(),
            max_inner_steps: 100_000_000,
            perturbation: PerturbSettings::default(),
            record_inner: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidParameter("window must be at least 1".into()));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidParameter(format!("tolerance {} must be positive", self.tolerance)));
        }
        if self.multi_start == 0 {
            return Err(Error::InvalidParameter("multi_start must be at least 1".into()));
        }
        if let Some(eta) = self.fixed_eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::InvalidParameter(format!("fixed step {eta} must be positive")));
            }
        }
        if self.max_inner_steps == 0 {
            return Err(Error::InvalidParameter("max_inner_steps must be positive".into()));
        }
        self.line_search.validate()?;
        self.grid.validate()
    }
}

/// What one epoch (one follow-the-leader solve) produced.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochOutcome {
    pub x: Vec3,
    /// Step certified at the returned point.
    pub eta: StepVector,
    pub inner_steps: u64,
    /// ‖g_proj‖ at the returned point under `eta`.
    pub exit_gradient_norm: f64,
    pub events: Vec<PerturbEvent>,
    /// Objective values along the inner iterations (only when recorded).
    pub inner_values: Vec<f64>,
    /// The epoch budget ran out; `x` is where the path stopped.
    pub exhausted: bool,
}

fn check_finite(x: &Vec3, iteration: usize) -> Result<()> {
    if linalg::is_finite(x) {
        Ok(())
    } else {
        Err(Error::NonFiniteIterate { iteration, iterate: *x })
    }
}

fn stalled_at(e: Error, iteration: usize) -> Error {
    match e {
        Error::LineSearchStalled { shrinks, .. } => Error::LineSearchStalled { iteration, shrinks },
        other => other,
    }
}

/// Fixed scalar step until `‖g_proj‖ ≤ threshold`.
pub fn tgd_epoch<O: Objective + ?Sized>(
    obj: &O,
    x0: &Vec3,
    eta: f64,
    threshold: f64,
    b: &FeasibleBox,
    max_steps: u64,
    record: bool,
) -> Result<EpochOutcome> {
    let step = StepVector::uniform(eta)?;
    let mut x = *x0;
    let mut steps = 0u64;
    let mut inner_values = Vec::new();
    loop {
        let g = obj.gradient(&x)?;
        let gp = projected_gradient(&g, &x, &step, b);
        let gn = linalg::norm(&gp);
        if record {
            inner_values.push(obj.value(&x)?);
        }
        if gn <= threshold {
            return Ok(EpochOutcome {
                x,
                eta: step,
                inner_steps: steps,
                exit_gradient_norm: gn,
                events: Vec::new(),
                inner_values,
                exhausted: false,
            });
        }
        if steps >= max_steps {
            return Err(Error::EpochBudgetExceeded { iteration: 0, budget: max_steps });
        }
        x = linalg::sub(&x, &linalg::scale(&gp, eta));
        check_finite(&x, 0)?;
        steps += 1;
    }
}

/// Line-search-refreshed steps until `‖g_proj‖ ≤ tolerance`.
#[allow(clippy::too_many_arguments)]
pub fn atgd_epoch<O: Objective + ?Sized>(
    obj: &O,
    x0: &Vec3,
    eta0: &StepVector,
    tolerance: f64,
    b: &FeasibleBox,
    ls: &LineSearchConfig,
    max_steps: u64,
    record: bool,
) -> Result<EpochOutcome> {
    let mut x = *x0;
    let mut eta = *eta0;
    let mut steps = 0u64;
    let mut inner_values = Vec::new();
    loop {
        let g = obj.gradient(&x)?;
        let gn = linalg::norm(&projected_gradient(&g, &x, &eta, b));
        if gn <= tolerance {
            if record {
                inner_values.push(obj.value(&x)?);
            }
            return Ok(EpochOutcome {
                x,
                eta,
                inner_steps: steps,
                exit_gradient_norm: gn,
                events: Vec::new(),
                inner_values,
                exhausted: false,
            });
        }
        if steps >= max_steps {
            return Err(Error::EpochBudgetExceeded { iteration: 0, budget: max_steps });
        }
        let fx = obj.value(&x)?;
        if record {
            inner_values.push(fx);
        }
        let out = line_search(obj, &x, fx, &g, eta0, b, ls)?;
        eta = out.eta;
        x = linalg::sub(&x, &linalg::hadamard(&eta.0, &out.projected_gradient));
        check_finite(&x, 0)?;
        steps += 1;
    }
}

/// Perturbed epoch: escapes strict saddles by random kicks and returns the
/// last point whose kick failed to buy a decrease of `f_thres`.
#[allow(clippy::too_many_arguments)]
pub fn aptgd_epoch<O: Objective + ?Sized, R: Rng + ?Sized>(
    obj: &O,
    x0: &Vec3,
    eta0: &StepVector,
    pc: &PerturbConfig,
    b: &FeasibleBox,
    ls: &LineSearchConfig,
    rng: &mut R,
    budget: u64,
    record: bool,
) -> Result<EpochOutcome> {
    let out = aptgd_epoch_soft(obj, x0, eta0, pc, b, ls, rng, budget, record)?;
    if out.exhausted {
        return Err(Error::EpochBudgetExceeded { iteration: 0, budget });
    }
    Ok(out)
}

/// As [`aptgd_epoch`], but running out of budget returns the current point
/// flagged `exhausted` instead of failing.
#[allow(clippy::too_many_arguments)]
fn aptgd_epoch_soft<O: Objective + ?Sized, R: Rng + ?Sized>(
    obj: &O,
    x0: &Vec3,
    eta0: &StepVector,
    pc: &PerturbConfig,
    b: &FeasibleBox,
    ls: &LineSearchConfig,
    rng: &mut R,
    budget: u64,
    record: bool,
) -> Result<EpochOutcome> {
    let t_thres = pc.t_thres.min(i64::MAX as u64 / 2) as i64;
    let mut t_noise: i64 = pc.t_noise_init;
    let mut x = *x0;
    let mut x_tilde = *x0;
    let mut f_tilde = f64::INFINITY;
    let mut cert_eta = *eta0;
    let mut cert_gn = f64::INFINITY;
    let mut events: Vec<PerturbEvent> = Vec::new();
    let mut inner_values = Vec::new();
    let mut t: i64 = 0;
    loop {
        let mut g = obj.gradient(&x)?;
        let mut fx = obj.value(&x)?;
        let mut out = line_search(obj, &x, fx, &g, eta0, b, ls)?;
        if t as u64 >= budget {
            return Ok(EpochOutcome {
                x,
                eta: out.eta,
                inner_steps: t as u64,
                exit_gradient_norm: linalg::norm(&out.projected_gradient),
                events,
                inner_values,
                exhausted: true,
            });
        }
        if linalg::norm(&out.projected_gradient) <= pc.g_thres && t - t_noise > t_thres {
            t_noise = t;
            x_tilde = x;
            f_tilde = fx;
            cert_eta = out.eta;
            cert_gn = linalg::norm(&out.projected_gradient);
            x = perturb::perturb(&x, pc.radius, b, rng);
            check_finite(&x, 0)?;
            g = obj.gradient(&x)?;
            fx = obj.value(&x)?;
            out = line_search(obj, &x, fx, &g, eta0, b, ls)?;
            events.push(PerturbEvent {
                step: t as u64,
                value_before: f_tilde,
                value_after: None,
                escaped: None,
            });
        }
        if record {
            inner_values.push(fx);
        }
        if log::log_enabled!(log::Level::Trace) && t % 1_000_000 == 0 {
            log::trace!(
                "t={t} f={fx:.6e} |gp|={:.3e} eta={:?} x={x:?}",
                linalg::norm(&out.projected_gradient),
                out.eta.0
            );
        }
        if t - t_noise == t_thres {
            let ev = events.last_mut().expect("a perturbation precedes every escape check");
            ev.value_after = Some(fx);
            let escaped = fx - f_tilde <= -pc.f_thres;
            ev.escaped = Some(escaped);
            if !escaped {
                return Ok(EpochOutcome {
                    x: x_tilde,
                    eta: cert_eta,
                    inner_steps: t as u64,
                    exit_gradient_norm: cert_gn,
                    events,
                    inner_values,
                    exhausted: false,
                });
            }
        }
        x = linalg::sub(&x, &linalg::hadamard(&out.eta.0, &out.projected_gradient));
        check_finite(&x, 0)?;
        t += 1;
    }
}

/// Per-path generator: the master seed with the path index as stream id.
pub fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64 + 1);
    rng
}

fn uniform_in_box<R: Rng + ?Sized>(b: &FeasibleBox, rng: &mut R) -> Vec3 {
    let lo = b.lower();
    let w = b.widths();
    [
        lo[0] + w[0] * rng.random::<f64>(),
        lo[1] + w[1] * rng.random::<f64>(),
        lo[2] + w[2] * rng.random::<f64>(),
    ]
}

/// Selection score of `x` over `seen` under `rule`.
pub fn selection_score(x: &Vec3, seen: &[Observation], p: &RiverParams, rule: SelectionRule) -> Result<f64> {
    if seen.is_empty() {
        return Ok(0.0);
    }
    let est = ade::SourceEstimate::from_array(*x);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for o in seen {
        let r = ade::residual(&est, o, p)?;
        sum += r;
        sum_sq += r * r;
    }
    let m = seen.len() as f64;
    Ok(match rule {
        SelectionRule::SquaredMeanResidual => (sum / m).powi(2),
        SelectionRule::MeanSquaredResidual => sum_sq / m,
    })
}

struct PathState {
    x: Vec3,
    rng: ChaCha8Rng,
    calls: u64,
}

/// Per-epoch inputs shared by every path.
struct EpochPlan {
    eta0: StepVector,
    perturb: Option<PerturbConfig>,
    budget: u64,
}

fn plan_epoch(
    kind: EpochKind,
    obj: &WindowObjective,
    b: &FeasibleBox,
    cfg: &RunConfig,
    delta_f: f64,
    moduli: &mut (f64, f64),
) -> Result<EpochPlan> {
    match kind {
        EpochKind::Fixed => {
            let eta = cfg
                .fixed_eta
                .ok_or_else(|| Error::Config("the fixed-step variant needs `fixed_eta`".into()))?;
            Ok(EpochPlan {
                eta0: StepVector::uniform(eta)?,
                perturb: None,
                budget: cfg.max_inner_steps,
            })
        }
        EpochKind::Adaptive => Ok(EpochPlan {
            eta0: init_step_sizes(obj, b, &cfg.grid)?.eta,
            perturb: None,
            budget: cfg.max_inner_steps,
        }),
        EpochKind::Perturbed => {
            let s = &cfg.perturbation;
            let init = init_step_sizes(obj, b, &cfg.grid)?;
            let (kappa, iota) = match (s.kappa, s.iota) {
                (Some(k), Some(i)) => (k, i),
                (k, i) => {
                    let est = SmoothnessConstants::estimate(obj.terms(), b, obj.params(), cfg.grid.points_per_axis)?;
                    moduli.0 = moduli.0.max(est.lipschitz_loss);
                    moduli.1 = moduli.1.max(est.lipschitz_hessian);
                    (k.unwrap_or(moduli.0), i.unwrap_or(moduli.1))
                }
            };
            let pc = aptgd_params(s.c, s.epsilon, cfg.tolerance, delta_f, kappa, iota)?;
            // Same orientation as the adaptive variant, rescaled so ‖η⁰‖_∞ = c/κ.
            let dir = steps_from_moduli(&init.moduli, 1.0, &GridConfig { step_scale: 1.0, ..cfg.grid })?;
            let target = s.c / kappa;
            let eta0 = StepVector::new(linalg::scale(&dir.0, target / dir.max()))?;
            let budget = s.epoch_budget.unwrap_or_else(|| pc.default_budget()).min(cfg.max_inner_steps);
            Ok(EpochPlan {
                eta0,
                perturb: Some(pc),
                budget,
            })
        }
    }
}

fn run_path_epoch(
    kind: EpochKind,
    obj: &WindowObjective,
    state: &mut PathState,
    plan: &EpochPlan,
    b: &FeasibleBox,
    cfg: &RunConfig,
) -> Result<EpochOutcome> {
    let before = obj.gradient_calls();
    let out = match kind {
        EpochKind::Fixed => tgd_epoch(
            obj,
            &state.x,
            plan.eta0.0[0],
            cfg.tolerance / cfg.window as f64,
            b,
            plan.budget,
            cfg.record_inner,
        ),
        EpochKind::Adaptive => atgd_epoch(
            obj,
            &state.x,
            &plan.eta0,
            cfg.tolerance,
            b,
            &cfg.line_search,
            plan.budget,
            cfg.record_inner,
        ),
        EpochKind::Perturbed => aptgd_epoch_soft(
            obj,
            &state.x,
            &plan.eta0,
            plan.perturb.as_ref().expect("perturbed plan"),
            b,
            &cfg.line_search,
            &mut state.rng,
            plan.budget,
            cfg.record_inner,
        ),
    }?;
    state.calls += obj.gradient_calls() - before;
    state.x = out.x;
    Ok(out)
}

fn tag_iteration(e: Error, n: usize) -> Error {
    match e {
        Error::LineSearchStalled { .. } => stalled_at(e, n),
        Error::NonFiniteIterate { iterate, .. } => Error::NonFiniteIterate { iteration: n, iterate },
        Error::EpochBudgetExceeded { budget, .. } => Error::EpochBudgetExceeded { iteration: n, budget },
        Error::Path { path, source } => Error::Path {
            path,
            source: Box::new(tag_iteration(*source, n)),
        },
        other => other,
    }
}

/// Runs `algo` over `stream`; the multi-start variants use
/// `cfg.multi_start` paths, the others a single path.
pub fn run(
    algo: Algorithm,
    stream: &[Observation],
    b: &FeasibleBox,
    p: &RiverParams,
    cfg: &RunConfig,
) -> Result<RunTrace> {
    cfg.validate()?;
    p.validate()?;
    b.validate_for(stream)?;
    let kind = algo.epoch_kind();
    let paths = if algo.is_multistart() { cfg.multi_start } else { 1 };

    let mut states: Vec<PathState> = (0..paths)
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            let drawn = uniform_in_box(b, &mut rng);
            let x = match (i, cfg.start) {
                (0, Some(s)) => crate::geometry::project(b, &s),
                _ => drawn,
            };
            PathState { x, rng, calls: 0 }
        })
        .collect();

    let mut history = LossHistory::new(cfg.window, paths > 1)?;
    let mut trace = RunTrace::new(algo, cfg.clone(), paths);
    let mut played_by = 0usize;
    let mut played = states[0].x;
    let mut running_max = 0.0f64;
    // Running maxima of the per-window (κ̂, ι̂) estimates.
    let mut moduli = (0.0f64, 0.0f64);
    let clock = Instant::now();

    for (idx, o) in stream.iter().enumerate() {
        let n = idx + 1;
        history.push(*o);
        let base = history.objective(*p);
        let f_played = base.value(&played).map_err(|e| tag_iteration(e, n))?;
        running_max = running_max.max(f_played);
        let delta_f = cfg
            .perturbation
            .delta_f
            .unwrap_or((1.5 * running_max).max(f64::MIN_POSITIVE));
        let plan = plan_epoch(kind, &base, b, cfg, delta_f, &mut moduli).map_err(|e| tag_iteration(e, n))?;
        if let Some(pc) = &plan.perturb {
            log::trace!("n={n} eta0={:?} {pc:?}", plan.eta0.0);
        }

        let outcomes: Vec<Result<EpochOutcome>> = if paths == 1 {
            vec![run_path_epoch(kind, &base, &mut states[0], &plan, b, cfg)]
        } else {
            states
                .par_iter_mut()
                .enumerate()
                .map(|(i, st)| {
                    let obj = history.objective(*p);
                    run_path_epoch(kind, &obj, st, &plan, b, cfg).map_err(|e| e.in_path(i))
                })
                .collect()
        };
        let mut results = Vec::with_capacity(paths);
        for r in outcomes {
            results.push(r.map_err(|e| tag_iteration(e, n))?);
        }

        if results.iter().all(|r| r.exhausted) {
            return Err(Error::EpochBudgetExceeded {
                iteration: n,
                budget: plan.budget,
            });
        }
        let winner = if paths == 1 {
            0
        } else {
            let mut best = (usize::MAX, f64::INFINITY);
            for (i, st) in states.iter().enumerate() {
                if results[i].exhausted {
                    continue;
                }
                let s = selection_score(&st.x, history.seen(), p, cfg.selection).unwrap_or(f64::INFINITY);
                let s = if s.is_nan() { f64::INFINITY } else { s };
                if s < best.1 {
                    best = (i, s);
                }
            }
            if best.0 == usize::MAX {
                // Every finished path scored non-finite: keep the first finished one.
                results.iter().position(|r| !r.exhausted).expect("some path finished")
            } else {
                best.0
            }
        };

        // Instrumentation: uncounted evaluations at the played point.
        let certified = &results[played_by];
        let g = base.gradient(&played).map_err(|e| tag_iteration(e, n))?;
        let gp = projected_gradient(&g, &played, &certified.eta, b);
        let loss = ade::loss(&ade::SourceEstimate::from_array(played), o, p).map_err(|e| tag_iteration(e, n))?;
        let perturbations = results.iter().map(|r| r.events.len() as u32).sum();
        let escapes = results
            .iter()
            .flat_map(|r| r.events.iter())
            .filter(|e| e.escaped == Some(true))
            .count() as u32;
        trace.push(
            IterationRecord {
                n,
                x: played,
                eta: certified.eta.0,
                eta0: plan.eta0.0,
                inner_steps: results.iter().map(|r| r.inner_steps).sum(),
                grad_calls: states.iter().map(|s| s.calls).sum(),
                loss,
                local_contrib: linalg::dot(&gp, &gp),
                exit_gradient_norm: results[winner].exit_gradient_norm,
                winner,
                perturbations,
                escapes,
                exhausted: results.iter().filter(|r| r.exhausted).count() as u32,
            },
            clock.elapsed().as_secs_f64(),
            if cfg.record_inner {
                results[played_by].inner_values.clone()
            } else {
                Vec::new()
            },
            results[played_by].events.clone(),
        );

        log::debug!(
            "{algo} n={n} steps={} perturbations={perturbations} winner={winner} t={:.3}s",
            trace.records[n - 1].inner_steps,
            clock.elapsed().as_secs_f64()
        );
        played_by = winner;
        played = states[winner].x;
    }
    trace.final_estimate = played;
    Ok(trace)
}

pub fn run_tgd(stream: &[Observation], b: &FeasibleBox, p: &RiverParams, cfg: &RunConfig) -> Result<RunTrace> {
    run(Algorithm::Tgd, stream, b, p, cfg)
}

pub fn run_atgd(stream: &[Observation], b: &FeasibleBox, p: &RiverParams, cfg: &RunConfig) -> Result<RunTrace> {
    run(Algorithm::Atgd, stream, b, p, cfg)
}

/// `settings` replaces `cfg.perturbation`.
pub fn run_aptgd(
    stream: &[Observation],
    b: &FeasibleBox,
    p: &RiverParams,
    cfg: &RunConfig,
    settings: &PerturbSettings,
) -> Result<RunTrace> {
    let cfg = RunConfig {
        perturbation: *settings,
        ..cfg.clone()
    };
    run(Algorithm::Aptgd, stream, b, p, &cfg)
}

/// `perturbed` selects MPTGD (with `settings`) over MTGD.
pub fn run_multistart(
    perturbed: bool,
    stream: &[Observation],
    b: &FeasibleBox,
    p: &RiverParams,
    cfg: &RunConfig,
    settings: Option<&PerturbSettings>,
) -> Result<RunTrace> {
    if perturbed {
        let s = settings.ok_or_else(|| Error::Config("perturbed multi-start needs perturbation settings".into()))?;
        let cfg = RunConfig {
            perturbation: *s,
            ..cfg.clone()
        };
        run(Algorithm::Mptgd, stream, b, p, &cfg)
    } else {
        run(Algorithm::Mtgd, stream, b, p, cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothing::FnObjective;

    fn cube(h: f64) -> FeasibleBox {
        FeasibleBox::new((-h, h), (-h, h), (-h, h)).unwrap()
    }

    #[test]
    fn fixed_step_matches_hand_rolled_descent() {
        // f = (x-1)²/2 in the first coordinate only
        let obj = FnObjective::new(|x: &Vec3| 0.5 * (x[0] - 1.0).powi(2), |x: &Vec3| [x[0] - 1.0, 0.0, 0.0]);
        let out = tgd_epoch(&obj, &[-1.0, 0.0, 0.0], 0.5, 1e-3, &cube(4.0), 1000, false).unwrap();
        let mut x = -1.0f64;
        let mut steps = 0;
        while (x - 1.0).abs() > 1e-3 {
            x -= 0.5 * (x - 1.0);
            steps += 1;
        }
        assert_eq!(out.x[0], x);
        assert_eq!(out.inner_steps, steps);
    }

    #[test]
    fn adaptive_epoch_exit_certificate() {
        let obj = FnObjective::new(
            |x: &Vec3| x[0] * x[0] + 4.0 * x[1] * x[1] + 0.5 * x[2] * x[2],
            |x: &Vec3| [2.0 * x[0], 8.0 * x[1], x[2]],
        );
        let eta0 = StepVector::uniform(0.1).unwrap();
        let b = cube(3.0);
        let out = atgd_epoch(&obj, &[2.0, -1.0, 1.5], &eta0, 1e-4, &b, &LineSearchConfig::default(), 100_000, true).unwrap();
        let g = obj.gradient(&out.x).unwrap();
        assert!(linalg::norm(&projected_gradient(&g, &out.x, &out.eta, &b)) <= 1e-4);
        assert!(out.eta.0.iter().zip(eta0.0).all(|(a, b)| *a <= b));
        for w in out.inner_values.windows(2) {
            assert!(w[1] < w[0] + 1e-12);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let obj = FnObjective::new(|x: &Vec3| x[0] * x[0], |x: &Vec3| [2.0 * x[0], 0.0, 0.0]);
        let err = tgd_epoch(&obj, &[1.0, 0.0, 0.0], 1e-6, 1e-12, &cube(2.0), 3, false).unwrap_err();
        assert!(matches!(err, Error::EpochBudgetExceeded { budget: 3, .. }));
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("sgd".parse::<Algorithm>().is_err());
    }

    #[test]
    fn path_streams_differ_and_repeat() {
        let a: f64 = path_rng(5, 0).random();
        let b: f64 = path_rng(5, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, path_rng(5, 0).random::<f64>());
    }

    #[test]
    fn selection_rules() {
        // D = 1/(4π), A = 1, at the plume peak C = s
        let p = RiverParams::new(1.0, 1.0 / (4.0 * std::f64::consts::PI), 3.0, 0.0).unwrap();
        let o = |c: f64| Observation {
            sensor_id: 0,
            sensor_location: 3.0,
            sample_time: 1.0,
            concentration: c,
        };
        let x = [1.0, 0.0, 0.0];
        let seen = [o(0.0), o(2.0)];
        let sq_mean = selection_score(&x, &seen, &p, SelectionRule::SquaredMeanResidual).unwrap();
        let mean_sq = selection_score(&x, &seen, &p, SelectionRule::MeanSquaredResidual).unwrap();
        assert!(sq_mean.abs() < 1e-24);
        assert!((mean_sq - 1.0).abs() < 1e-12);
    }
}
