//! Substrate profile inside the biofilm on the rescaled interval `[0, 1]`.
//!
//! For thickness `h` and bulk concentration `S` the profile solves
//!
//! ```text
//! kappa u'' = h^2 r(u),   u'(0) = 0,   u(1) = S,
//! ```
//!
//! or equivalently the fixed point `u = F(u)` with
//! `F(u)(y) = S - (h^2/kappa) int_y^1 int_0^eta r(u(xi)) dxi deta`.
//!
//! # Discretization
//!
//! The double integral is replaced by nested sums on a uniform grid of `N`
//! intervals. The inner sum uses compact fourth-order (Numerov) weights, so
//! consecutive slopes satisfy
//!
//! ```text
//! u[i+1] - u[i] = u[i] - u[i-1] + (c dy^2 / 12) (f[i-1] + 10 f[i] + f[i+1]),   c = h^2 / kappa,
//! ```
//!
//! with the even reflection `u[-1] = u[1]` closing the sum at `y = 0`. The
//! discrete map `F` therefore has the same structure as the continuous one
//! (cumulative sum for the slope, then a cumulative sum from the right for the
//! value) and is solved either by damped Picard iteration on `u = F(u)` or by
//! Newton's method on the equivalent tridiagonal system. Both produce the same
//! discrete solution; the reported `residual` is always the sup-norm of
//! `u - F(u)`.

use serde::Serialize;
use thiserror::Error;

use crate::kinetics::{KineticsSet, ModelParams};
use crate::numerics::{cumulative_integral, simpson, solve_tridiagonal};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BvpError {
    #[error("negative input: h = {h}, S = {s}")]
    NegativeInput { h: f64, s: f64 },
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("no convergence after {iterations} iterations (defect {defect:.3e})")]
    NotConverged { defect: f64, iterations: usize },
    #[error("singular linear system")]
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BvpMethod {
    /// Damped Picard, switching to Newton when it stalls.
    Auto,
    Picard,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BvpOptions {
    /// Number of grid intervals (even, at least 4).
    pub n: usize,
    /// Sup-norm tolerance on `u - F(u)`.
    pub tol: f64,
    pub method: BvpMethod,
    /// Upper bound on the Picard relaxation weight.
    pub damping: f64,
    /// Picard iterations before [`BvpMethod::Auto`] hands over to Newton.
    pub picard_switch: usize,
    pub max_iter: usize,
}

impl Default for BvpOptions {
    fn default() -> Self {
        Self {
            n: 512,
            tol: 1e-10,
            method: BvpMethod::Auto,
            damping: 0.5,
            picard_switch: 50,
            max_iter: 20_000,
        }
    }
}

impl BvpOptions {
    pub fn with_method(mut self, method: BvpMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<(), BvpError> {
        if self.n < 4 || self.n % 2 != 0 {
            return Err(BvpError::InvalidOptions(format!("grid size must be even and >= 4, got {}", self.n)));
        }
        if !(self.tol > 0.0) {
            return Err(BvpError::InvalidOptions(format!("tolerance must be positive, got {}", self.tol)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(BvpError::InvalidOptions(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        Ok(())
    }
}

/// How a profile was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProfileSource {
    /// `h = 0` or `S = 0`: constant profile, no iteration.
    Exact,
    Picard,
    Newton,
    PicardThenNewton,
}

/// Solved profile `u[h, S]` on the uniform grid `y_i = i / N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubstrateProfile {
    pub h: f64,
    pub s: f64,
    pub kappa: f64,
    pub u: Vec<f64>,
    /// Sup-norm of `u - F(u)`.
    pub residual: f64,
    /// `(h^2 / kappa) int_0^1 r(u) dy`, which equals `u'(1)`.
    pub flux_scaled: f64,
    pub iterations: usize,
    pub source: ProfileSource,
}

impl SubstrateProfile {
    pub fn intervals(&self) -> usize {
        self.u.len() - 1
    }

    pub fn dy(&self) -> f64 {
        1.0 / self.intervals() as f64
    }

    pub fn y(&self, i: usize) -> f64 {
        i as f64 * self.dy()
    }

    /// Concentration at the substratum, `u(0)`.
    pub fn center(&self) -> f64 {
        self.u[0]
    }

    /// Simpson quadrature of `phi(u(y))` over `[0, 1]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, phi: F) -> f64 {
        let vals: Vec<f64> = self.u.iter().map(|&v| phi(v)).collect();
        simpson(&vals, self.dy())
    }

    /// Linear interpolation of the profile at `y` in `[0, 1]`.
    pub fn at(&self, y: f64) -> f64 {
        let n = self.intervals();
        let pos = (y.clamp(0.0, 1.0) * n as f64).min(n as f64);
        let i = (pos.floor() as usize).min(n - 1);
        let w = pos - i as f64;
        self.u[i] * (1.0 - w) + self.u[i + 1] * w
    }
}

/// Numerov-weighted nested sums: returns `F(u)` for `u_N = s`.
fn apply_fixed_point_map(u: &[f64], s: f64, c: f64, kin: &KineticsSet, out: &mut [f64]) {
    let n = u.len() - 1;
    let dy = 1.0 / n as f64;
    let w = c * dy * dy / 12.0;
    let f: Vec<f64> = u.iter().map(|&v| kin.r(v)).collect();
    // out[i] temporarily holds the slope increment u[i+1] - u[i]
    let mut slope = w * (5.0 * f[0] + f[1]);
    out[0] = slope;
    for i in 1..n {
        slope += w * (f[i - 1] + 10.0 * f[i] + f[i + 1]);
        out[i] = slope;
    }
    out[n] = s;
    for i in (0..n).rev() {
        out[i] = out[i + 1] - out[i];
    }
}

fn defect(u: &[f64], s: f64, c: f64, kin: &KineticsSet, scratch: &mut [f64]) -> f64 {
    apply_fixed_point_map(u, s, c, kin, scratch);
    u.iter().zip(scratch.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Upper bound on `sup r'` over `[0, s]` for the shipped (monotone-derivative) families.
fn max_uptake_slope(kin: &KineticsSet, s: f64) -> f64 {
    kin.dr(0.0).max(kin.dr(s))
}

/// Relaxation weight that keeps `u <- (1 - w) u + w F(u)` contractive.
fn picard_weight(kin: &KineticsSet, s: f64, c: f64, cap: f64) -> f64 {
    // Largest eigenvalue of the Green's operator for -d^2/dy^2 with u'(0) = u(1) = 0 is 4/pi^2.
    let k_hat = 1.1 * c * max_uptake_slope(kin, s) * 4.0 / (std::f64::consts::PI * std::f64::consts::PI);
    cap.min(2.0 / (2.0 + k_hat))
}

/// Profile of the linear secant problem `u'' = c (r(S)/S) u`, used as cold start.
fn initial_guess(n: usize, s: f64, c: f64, kin: &KineticsSet) -> Vec<f64> {
    let lambda = (c * kin.r(s) / s).sqrt();
    let dy = 1.0 / n as f64;
    (0..=n)
        .map(|i| {
            let y = i as f64 * dy;
            // cosh(lambda y) / cosh(lambda), written to avoid overflow
            s * ((-lambda * (1.0 - y)).exp() + (-lambda * (1.0 + y)).exp()) / (1.0 + (-2.0 * lambda).exp())
        })
        .collect()
}

struct Iterate {
    u: Vec<f64>,
    defect: f64,
    iterations: usize,
}

fn picard(
    mut u: Vec<f64>,
    s: f64,
    c: f64,
    kin: &KineticsSet,
    opts: &BvpOptions,
    max_iter: usize,
    stop_on_stall: bool,
) -> (Iterate, bool) {
    let n = u.len() - 1;
    let mut scratch = vec![0.0; n + 1];
    let mut omega = picard_weight(kin, s, c, opts.damping);
    let mut d = defect(&u, s, c, kin, &mut scratch);
    let mut best = Iterate { u: u.clone(), defect: d, iterations: 0 };
    let mut it = 0;
    while it < max_iter {
        if d <= opts.tol {
            return (Iterate { u, defect: d, iterations: it }, true);
        }
        it += 1;
        for (ui, fi) in u.iter_mut().zip(scratch.iter()) {
            *ui = (1.0 - omega) * *ui + omega * fi;
        }
        let prev = d;
        d = defect(&u, s, c, kin, &mut scratch);
        if d < best.defect {
            best = Iterate { u: u.clone(), defect: d, iterations: it };
        }
        if stop_on_stall && d > 0.9 * prev {
            break;
        }
        if !stop_on_stall && d > 2.0 * best.defect {
            // the sup-norm defect is not monotone under a contraction, so only a
            // clear blow-up means the weight was too large: restart from the best iterate
            omega *= 0.5;
            u = best.u.clone();
            d = defect(&u, s, c, kin, &mut scratch);
        }
    }
    best.iterations = it;
    if d <= opts.tol {
        return (Iterate { u, defect: d, iterations: it }, true);
    }
    (best, false)
}

fn newton(
    mut u: Vec<f64>,
    s: f64,
    c: f64,
    kin: &KineticsSet,
    opts: &BvpOptions,
) -> Result<Iterate, BvpError> {
    const MAX_NEWTON: usize = 100;
    let n = u.len() - 1;
    let dy = 1.0 / n as f64;
    let w = c * dy * dy / 12.0;
    let mut scratch = vec![0.0; n + 1];
    u[n] = s;
    let mut d = defect(&u, s, c, kin, &mut scratch);
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut polished = false;

    for it in 1..=MAX_NEWTON {
        let f: Vec<f64> = u.iter().map(|&v| kin.r(v)).collect();
        let fp: Vec<f64> = u.iter().map(|&v| kin.dr(v)).collect();
        rhs[0] = -(2.0 * (u[1] - u[0]) - w * (10.0 * f[0] + 2.0 * f[1]));
        diag[0] = -2.0 - 10.0 * w * fp[0];
        upper[0] = 2.0 - 2.0 * w * fp[1];
        for i in 1..n {
            rhs[i] = -(u[i + 1] - 2.0 * u[i] + u[i - 1] - w * (f[i - 1] + 10.0 * f[i] + f[i + 1]));
            lower[i] = 1.0 - w * fp[i - 1];
            diag[i] = -2.0 - 10.0 * w * fp[i];
            upper[i] = 1.0 - w * fp[i + 1];
        }
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs).ok_or(BvpError::Singular)?;
        let step_norm = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        let mut lambda = 1.0;
        let mut trial = u.clone();
        let mut d_trial = f64::INFINITY;
        for _ in 0..30 {
            for i in 0..n {
                trial[i] = (u[i] + lambda * rhs[i]).clamp(0.0, s);
            }
            d_trial = defect(&trial, s, c, kin, &mut scratch);
            if d_trial < d || d_trial <= opts.tol {
                break;
            }
            lambda *= 0.5;
        }
        if !(d_trial < d || d_trial <= opts.tol) {
            if d <= opts.tol {
                return Ok(Iterate { u, defect: d, iterations: it });
            }
            return Err(BvpError::NotConverged { defect: d, iterations: it });
        }
        u.copy_from_slice(&trial);
        d = d_trial;
        if d <= opts.tol {
            // one extra step brings the iterate to rounding level
            if polished || step_norm <= 1e-14 * s.max(1.0) {
                return Ok(Iterate { u, defect: d, iterations: it });
            }
            polished = true;
        }
    }
    if d <= opts.tol {
        Ok(Iterate { u, defect: d, iterations: MAX_NEWTON })
    } else {
        Err(BvpError::NotConverged { defect: d, iterations: MAX_NEWTON })
    }
}

fn check_inputs(h: f64, s: f64) -> Result<(), BvpError> {
    if !(h >= 0.0) || !(s >= 0.0) || !h.is_finite() || !s.is_finite() {
        return Err(BvpError::NegativeInput { h, s });
    }
    Ok(())
}

pub fn solve_profile(
    h: f64,
    s: f64,
    kin: &KineticsSet,
    params: &ModelParams,
    opts: &BvpOptions,
) -> Result<SubstrateProfile, BvpError> {
    solve_profile_warm(h, s, kin, params, opts, None)
}

/// As [`solve_profile`], starting the iteration from `warm` when it lives on the same grid.
pub fn solve_profile_warm(
    h: f64,
    s: f64,
    kin: &KineticsSet,
    params: &ModelParams,
    opts: &BvpOptions,
    warm: Option<&[f64]>,
) -> Result<SubstrateProfile, BvpError> {
    check_inputs(h, s)?;
    opts.validate()?;
    let n = opts.n;
    let kappa = params.kappa;
    if h == 0.0 || s == 0.0 {
        return Ok(SubstrateProfile {
            h,
            s,
            kappa,
            u: vec![s; n + 1],
            residual: 0.0,
            flux_scaled: 0.0,
            iterations: 0,
            source: ProfileSource::Exact,
        });
    }
    let c = h * h / kappa;
    let start = match warm {
        Some(w) if w.len() == n + 1 => {
            let mut u: Vec<f64> = w.iter().map(|v| v.clamp(0.0, s)).collect();
            u[n] = s;
            u
        }
        _ => initial_guess(n, s, c, kin),
    };

    let (it, source) = match opts.method {
        BvpMethod::Picard => {
            let (it, ok) = picard(start, s, c, kin, opts, opts.max_iter, false);
            if !ok {
                return Err(BvpError::NotConverged { defect: it.defect, iterations: it.iterations });
            }
            (it, ProfileSource::Picard)
        }
        BvpMethod::Newton => (newton(start, s, c, kin, opts)?, ProfileSource::Newton),
        BvpMethod::Auto => {
            let (it, ok) = picard(start, s, c, kin, opts, opts.picard_switch, true);
            if ok {
                (it, ProfileSource::Picard)
            } else {
                let picard_its = it.iterations;
                let mut nt = newton(it.u, s, c, kin, opts)?;
                nt.iterations += picard_its;
                (nt, ProfileSource::PicardThenNewton)
            }
        }
    };

    let u = it.u;
    let dy = 1.0 / n as f64;
    let rv: Vec<f64> = u.iter().map(|&v| kin.r(v)).collect();
    let flux_scaled = c * simpson(&rv, dy);
    Ok(SubstrateProfile {
        h,
        s,
        kappa,
        u,
        residual: it.defect,
        flux_scaled,
        iterations: it.iterations,
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SensitivityKind {
    /// `w = d u / d S`, with `w(1) = 1`.
    DS,
    /// `v = d u / d h`, with `v(1) = 0`.
    DH,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityProfile {
    pub kind: SensitivityKind,
    pub values: Vec<f64>,
    /// `d/dy` of `values` at the nodes.
    pub derivatives: Vec<f64>,
}

/// Solves the linearized problem `kappa phi'' = h^2 r'(u) phi (+ 2 h r(u))` on
/// the profile's grid with the same compact stencil as the profile itself, so
/// the result is the exact derivative of the discrete profile.
pub fn solve_sensitivity(
    profile: &SubstrateProfile,
    kind: SensitivityKind,
    kin: &KineticsSet,
    params: &ModelParams,
) -> Result<SensitivityProfile, BvpError> {
    let n = profile.intervals();
    let h = profile.h;
    let kappa = params.kappa;
    if h == 0.0 {
        let v = match kind {
            SensitivityKind::DS => 1.0,
            SensitivityKind::DH => 0.0,
        };
        return Ok(SensitivityProfile { kind, values: vec![v; n + 1], derivatives: vec![0.0; n + 1] });
    }
    let dy = profile.dy();
    let c = h * h / kappa;
    let w = dy * dy / 12.0;
    let a: Vec<f64> = profile.u.iter().map(|&v| c * kin.dr(v)).collect();
    let src: Vec<f64> = match kind {
        SensitivityKind::DS => vec![0.0; n + 1],
        SensitivityKind::DH => profile.u.iter().map(|&v| 2.0 * h / kappa * kin.r(v)).collect(),
    };
    let boundary = match kind {
        SensitivityKind::DS => 1.0,
        SensitivityKind::DH => 0.0,
    };

    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    diag[0] = -2.0 - 10.0 * w * a[0];
    upper[0] = 2.0 - 2.0 * w * a[1];
    rhs[0] = w * (10.0 * src[0] + 2.0 * src[1]);
    for i in 1..n {
        lower[i] = 1.0 - w * a[i - 1];
        diag[i] = -2.0 - 10.0 * w * a[i];
        upper[i] = 1.0 - w * a[i + 1];
        rhs[i] = w * (src[i - 1] + 10.0 * src[i] + src[i + 1]);
    }
    rhs[n - 1] -= upper[n - 1] * boundary;
    solve_tridiagonal(&lower, &diag, &upper, &mut rhs).ok_or(BvpError::Singular)?;

    let mut values = rhs;
    values.push(boundary);
    let second: Vec<f64> = (0..=n).map(|i| a[i] * values[i] + src[i]).collect();
    let derivatives = cumulative_integral(&second, dy);
    Ok(SensitivityProfile { kind, values, derivatives })
}

/// `G = int r'(u) dS u dy` and `H = int r'(u) dh u dy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityIntegrals {
    /// Weighted integral of the `S`-sensitivity (positive).
    pub g: f64,
    /// Weighted integral of the `h`-sensitivity (nonpositive).
    pub h: f64,
}

pub fn sensitivity_integrals(
    profile: &SubstrateProfile,
    kin: &KineticsSet,
    params: &ModelParams,
) -> Result<SensitivityIntegrals, BvpError> {
    let ws = solve_sensitivity(profile, SensitivityKind::DS, kin, params)?;
    let wh = solve_sensitivity(profile, SensitivityKind::DH, kin, params)?;
    let dy = profile.dy();
    let gs: Vec<f64> = profile.u.iter().zip(&ws.values).map(|(&u, &w)| kin.dr(u) * w).collect();
    let hs: Vec<f64> = profile.u.iter().zip(&wh.values).map(|(&u, &v)| kin.dr(u) * v).collect();
    Ok(SensitivityIntegrals { g: simpson(&gs, dy), h: simpson(&hs, dy) })
}

/// Substrate uptake by the biofilm in the bulk balance: `(rho h / kappa) int_0^1 r(u) dy`.
pub fn boundary_flux_term(profile: &SubstrateProfile, params: &ModelParams) -> f64 {
    if profile.h == 0.0 {
        0.0
    } else {
        params.rho / profile.h * profile.flux_scaled
    }
}
