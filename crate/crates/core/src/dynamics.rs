//! Reactor dynamics: the right-hand side of the coupled ODE system and an
//! adaptive integrator that keeps the state nonnegative and watches the
//! a-priori bounds along the way.

use serde::Serialize;
use thiserror::Error;

use crate::kinetics::{KineticsSet, ModelParams};
use crate::numerics::ode::DormandPrince;
use crate::substrate_bvp::{boundary_flux_term, solve_profile_warm, BvpError, BvpOptions, SubstrateProfile};

/// Components in `[-CLAMP_BAND, 0)` are treated as roundoff and set to zero.
pub const CLAMP_BAND: f64 = 1e-12;
/// A step producing a component below `-REJECT_BAND` is rejected and halved.
pub const REJECT_BAND: f64 = 1e-9;
/// Slack allowed on the substrate bound `S <= max(S0, S*)`.
pub const S_BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReactorState {
    pub t: f64,
    pub h: f64,
    pub s: f64,
    pub q: f64,
}

impl ReactorState {
    pub fn new(t: f64, h: f64, s: f64, q: f64) -> Self {
        Self { t, h, s, q }
    }

    pub fn washout(params: &ModelParams) -> Self {
        Self::new(0.0, 0.0, params.s_star, 0.0)
    }

    pub fn components(&self) -> [f64; 3] {
        [self.h, self.s, self.q]
    }

    /// Max-norm distance of `(h, S, Q)` to `point`.
    pub fn distance_to(&self, point: [f64; 3]) -> f64 {
        self.components().iter().zip(point.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("substrate profile: {0}")]
    Bvp(#[from] BvpError),
    #[error("initial state must be nonnegative and finite, got (h, S, Q) = ({h}, {s}, {q})")]
    InvalidInitialState { h: f64, s: f64, q: f64 },
    #[error("invalid integration options: {0}")]
    InvalidOptions(String),
    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String, partial: Box<Trajectory> },
}

/// Right-hand side with the profile it was built from.
#[derive(Debug, Clone)]
pub struct RhsEval {
    pub value: [f64; 3],
    pub profile: SubstrateProfile,
}

/// Evaluates `(dh/dt, dS/dt, dQ/dt)` from a freshly solved profile.
///
/// `h` and `S` enter through their positive parts; `Q` is used as given.
pub fn rhs_with_profile(
    h: f64,
    s: f64,
    q: f64,
    kin: &KineticsSet,
    params: &ModelParams,
    bvp: &BvpOptions,
    warm: Option<&[f64]>,
) -> Result<RhsEval, BvpError> {
    let h = h.max(0.0);
    let s = s.max(0.0);
    let profile = solve_profile_warm(h, s, kin, params, bvp, warm)?;
    let growth = if h == 0.0 { 0.0 } else { h * profile.integrate(|u| kin.g(kin.r(u))) };
    let nu = kin.nu(s);
    let dh = kin.d(h) * h;
    let f1 = growth + params.alpha / params.beta * q - dh;
    let f2 = params.dilution * (params.s_star - s) - params.k1 * q * nu - boundary_flux_term(&profile, params);
    let f3 = (nu - params.k2()) * q + params.beta * dh - params.alpha * q;
    Ok(RhsEval { value: [f1, f2, f3], profile })
}

pub fn rhs(
    state: &ReactorState,
    kin: &KineticsSet,
    params: &ModelParams,
    bvp: &BvpOptions,
) -> Result<[f64; 3], BvpError> {
    Ok(rhs_with_profile(state.h, state.s, state.q, kin, params, bvp, None)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Spacing of the recorded samples.
    pub sample_dt: f64,
    pub bvp: BvpOptions,
    pub max_steps: usize,
    pub dt_min: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            sample_dt: 0.1,
            bvp: BvpOptions::default(),
            max_steps: 1_000_000,
            dt_min: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub state: ReactorState,
    /// Substrate concentration at the substratum.
    pub u0: f64,
    /// Substrate uptake of the biofilm as it enters the bulk balance.
    pub flux: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SBoundViolation {
    pub t: f64,
    pub s: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MonitorLog {
    pub accepted_steps: usize,
    /// Steps rejected by the error estimate.
    pub rejected_steps: usize,
    /// Steps rejected because a component dropped below `-REJECT_BAND`.
    pub negativity_rejections: usize,
    /// Smallest component of any accepted state before clamping.
    pub min_component_pre_clamp: f64,
    /// Accepted states that had a component below `-CLAMP_BAND` (but above `-REJECT_BAND`).
    pub clamps_beyond_roundoff: usize,
    pub s_bound: f64,
    pub max_s: f64,
    pub s_bound_violations: Vec<SBoundViolation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// States at multiples of `sample_dt` (plus the final time).
    pub samples: Vec<Sample>,
    /// State after every accepted step, starting with the initial state.
    pub steps: Vec<ReactorState>,
    pub monitor: MonitorLog,
}

impl Trajectory {
    pub fn initial(&self) -> &ReactorState {
        &self.steps[0]
    }

    pub fn last(&self) -> &ReactorState {
        self.steps.last().expect("trajectory holds the initial state")
    }

    pub fn nonnegative(&self) -> bool {
        self.monitor.min_component_pre_clamp >= -REJECT_BAND
            && self.steps.iter().all(|s| s.h >= 0.0 && s.s >= 0.0 && s.q >= 0.0)
    }
}

fn sample_at(
    state: ReactorState,
    kin: &KineticsSet,
    params: &ModelParams,
    bvp: &BvpOptions,
    warm: &mut Option<Vec<f64>>,
) -> Result<Sample, BvpError> {
    let p = solve_profile_warm(state.h, state.s, kin, params, bvp, warm.as_deref())?;
    let sample = Sample { state, u0: p.center(), flux: boundary_flux_term(&p, params) };
    *warm = Some(p.u);
    Ok(sample)
}

/// Integrates the reactor from `initial` (its `t` is the start time) for a span `t_end`.
pub fn integrate(
    initial: ReactorState,
    t_end: f64,
    kin: &KineticsSet,
    params: &ModelParams,
    opts: &IntegrateOptions,
) -> Result<Trajectory, DynamicsError> {
    let y0 = initial.components();
    if y0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(DynamicsError::InvalidInitialState { h: initial.h, s: initial.s, q: initial.q });
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(DynamicsError::InvalidOptions(format!("t_end must be nonnegative, got {t_end}")));
    }
    if !(opts.sample_dt > 0.0) || !(opts.rtol > 0.0) || !(opts.atol > 0.0) {
        return Err(DynamicsError::InvalidOptions("rtol, atol and sample_dt must be positive".into()));
    }
    opts.bvp.validate()?;

    let t0 = initial.t;
    let t1 = t0 + t_end;
    let s_bound = initial.s.max(params.s_star);
    let mut traj = Trajectory {
        samples: Vec::new(),
        steps: vec![initial],
        monitor: MonitorLog { min_component_pre_clamp: y0.iter().cloned().fold(f64::INFINITY, f64::min), s_bound, max_s: initial.s, ..Default::default() },
    };
    let mut sample_warm = None;
    traj.samples.push(sample_at(initial, kin, params, &opts.bvp, &mut sample_warm)?);
    if t_end == 0.0 {
        return Ok(traj);
    }

    let mut warm: Option<Vec<f64>> = None;
    let mut f = |_t: f64, y: &[f64]| -> Result<Vec<f64>, BvpError> {
        let e = rhs_with_profile(y[0], y[1], y[2], kin, params, &opts.bvp, warm.as_deref())?;
        warm = Some(e.profile.u);
        Ok(e.value.to_vec())
    };

    macro_rules! fail {
        ($t:expr, $reason:expr) => {
            return Err(DynamicsError::IntegrationFailure { t: $t, reason: $reason, partial: Box::new(traj) })
        };
    }

    let dp = DormandPrince::new(opts.rtol, opts.atol);
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = match f(t, &y) {
        Ok(k) => k,
        Err(e) => fail!(t, e.to_string()),
    };
    let mut dt = dp.initial_dt(&y, &k1, t_end);
    let mut next_sample = 1usize;
    let mut steps = 0usize;

    while t < t1 {
        if steps >= opts.max_steps {
            fail!(t, format!("step limit {} reached", opts.max_steps));
        }
        steps += 1;
        let last = t + dt >= t1 - 4.0 * f64::EPSILON * t1.abs().max(1.0);
        let h = if last { t1 - t } else { dt };
        let trial = match dp.trial(&mut f, t, &y, &k1, h) {
            Ok(tr) => tr,
            Err(e) => fail!(t, e.to_string()),
        };
        if trial.error > 1.0 {
            traj.monitor.rejected_steps += 1;
            dt = dp.next_dt(h, trial.error, false);
            if dt < opts.dt_min {
                fail!(t, format!("step size underflow (dt = {dt:e})"));
            }
            continue;
        }
        let min_comp = trial.y.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_comp < -REJECT_BAND {
            traj.monitor.negativity_rejections += 1;
            dt = 0.5 * h;
            if dt < opts.dt_min {
                fail!(t, format!("step size underflow (dt = {dt:e}) while keeping the state nonnegative"));
            }
            continue;
        }

        traj.monitor.accepted_steps += 1;
        traj.monitor.min_component_pre_clamp = traj.monitor.min_component_pre_clamp.min(min_comp);
        let t_new = if last { t1 } else { t + h };
        let mut y_new = trial.y.clone();
        let mut clamped = false;
        for v in y_new.iter_mut() {
            if *v < 0.0 {
                if *v < -CLAMP_BAND {
                    traj.monitor.clamps_beyond_roundoff += 1;
                }
                *v = 0.0;
                clamped = true;
            }
        }

        // samples that fall inside this step, from the dense output
        loop {
            let ts = t0 + next_sample as f64 * opts.sample_dt;
            if ts > t_new * (1.0 + 1e-14) || ts > t1 {
                break;
            }
            let ys = if (ts - t_new).abs() <= 1e-12 * t_new.abs().max(1.0) {
                y_new.clone()
            } else {
                trial.dense.eval(ts).into_iter().map(|v| v.max(0.0)).collect()
            };
            let st = ReactorState::new(ts, ys[0], ys[1], ys[2]);
            match sample_at(st, kin, params, &opts.bvp, &mut sample_warm) {
                Ok(s) => traj.samples.push(s),
                Err(e) => fail!(ts, e.to_string()),
            }
            next_sample += 1;
        }

        let state = ReactorState::new(t_new, y_new[0], y_new[1], y_new[2]);
        traj.monitor.max_s = traj.monitor.max_s.max(state.s);
        if state.s > s_bound + S_BOUND_TOL {
            traj.monitor.s_bound_violations.push(SBoundViolation { t: t_new, s: state.s, bound: s_bound });
        }
        traj.steps.push(state);

        t = t_new;
        k1 = if clamped {
            match f(t, &y_new) {
                Ok(k) => k,
                Err(e) => fail!(t, e.to_string()),
            }
        } else {
            trial.f_end
        };
        y = y_new;
        dt = dp.next_dt(h, trial.error, true);
    }

    let end = *traj.last();
    if traj.samples.last().map(|s| s.state.t) != Some(end.t) {
        match sample_at(end, kin, params, &opts.bvp, &mut sample_warm) {
            Ok(s) => traj.samples.push(s),
            Err(e) => fail!(end.t, e.to_string()),
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonitorError {
    #[error("boundedness monitor needs d(h) to exceed {level}, which the detachment law never reaches")]
    DetachmentTooWeak { level: f64 },
}

/// Constants of the boundedness argument for `V = eta h + Q + S / k1` and its check along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub eta: f64,
    pub eta0: f64,
    pub eta1: f64,
    pub g0: f64,
    pub h1: f64,
    pub delta: f64,
    pub initial_value: f64,
    pub bound: f64,
    pub max_value: f64,
    pub violations: usize,
    pub holds: bool,
}

pub fn orbit_bound_monitor(
    traj: &Trajectory,
    kin: &KineticsSet,
    params: &ModelParams,
) -> Result<BoundReport, MonitorError> {
    let k2 = params.k2();
    let beta = params.beta;
    let alpha = params.alpha;
    let eta = 0.5 * (beta + (k2 + alpha) * beta / alpha);
    let eta0 = k2 + alpha * (1.0 - eta / beta);
    let eta1 = eta - beta;

    let init = traj.initial();
    let s1 = init.s.max(params.s_star);
    let r_max = kin.r(s1);
    const GRID: usize = 1024;
    let g0 = (0..=GRID)
        .map(|i| kin.g(r_max * i as f64 / GRID as f64).abs())
        .fold(0.0, f64::max);
    let level = eta * (g0 + 1.0) / eta1;
    let h1 = kin.detachment.level_crossing(level).ok_or(MonitorError::DetachmentTooWeak { level })?;
    let delta = 1f64.min(params.dilution).min(eta0);

    let functional = |s: &ReactorState| eta * s.h + s.q + s.s / params.k1;
    let initial_value = functional(init);
    let bound = initial_value.max(((g0 + 1.0) * eta * h1 + params.dilution * params.s_star / params.k1) / delta) + 1e-6;
    let mut max_value = f64::NEG_INFINITY;
    let mut violations = 0;
    let all = traj.steps.iter().chain(traj.samples.iter().map(|s| &s.state));
    for s in all {
        let v = functional(s);
        max_value = max_value.max(v);
        if v > bound {
            violations += 1;
        }
    }
    Ok(BoundReport { eta, eta0, eta1, g0, h1, delta, initial_value, bound, max_value, violations, holds: violations == 0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LimitClass {
    Washout,
    Nontrivial { h: f64, s: f64, q: f64 },
    Undecided,
}

/// Empirical limit of a trajectory from its samples in the last `window` time units.
pub fn classify_limit(traj: &Trajectory, s_star: f64, window: f64, tol: f64) -> LimitClass {
    let t_last = traj.last().t;
    if t_last - traj.initial().t < window {
        return LimitClass::Undecided;
    }
    let tail: Vec<&ReactorState> = traj
        .samples
        .iter()
        .map(|s| &s.state)
        .filter(|s| s.t >= t_last - window - 1e-12)
        .collect();
    if tail.is_empty() {
        return LimitClass::Undecided;
    }
    if tail.iter().all(|s| s.distance_to([0.0, s_star, 0.0]) <= tol) {
        return LimitClass::Washout;
    }
    let n = tail.len() as f64;
    let mean = [
        tail.iter().map(|s| s.h).sum::<f64>() / n,
        tail.iter().map(|s| s.s).sum::<f64>() / n,
        tail.iter().map(|s| s.q).sum::<f64>() / n,
    ];
    if mean[0] > tol && tail.iter().all(|s| s.distance_to(mean) <= tol) {
        return LimitClass::Nontrivial { h: mean[0], s: mean[1], q: mean[2] };
    }
    LimitClass::Undecided
}
