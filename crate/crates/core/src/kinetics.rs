//! Reactor constants, the rate-law families and the structural assumption checks.
//!
//! The model needs four scalar functions: the biofilm uptake rate `r(c)`, the
//! planktonic growth rate `nu(S)`, the net biofilm growth `g(s)` applied to the
//! uptake rate, and the detachment rate `d(h)`. Each one is drawn from a small
//! closed family with an analytic derivative, because the equilibrium Jacobian
//! and the sensitivity problems need first derivatives everywhere.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KineticsError {
    #[error("{name} requires a nonnegative argument, got {value}")]
    NegativeArgument { name: &'static str, value: f64 },
    #[error("parameter {name} must be finite and strictly positive, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

fn positive(name: &'static str, value: f64) -> Result<(), KineticsError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(KineticsError::InvalidParameter { name, value })
    }
}

/// Reactor and transport constants.
///
/// `k2 = D + kQ` is not a field: it is always recomputed by [`ModelParams::k2`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    /// Substrate diffusion coefficient inside the biofilm.
    pub kappa: f64,
    /// Dilution rate `D`.
    pub dilution: f64,
    /// Substrate consumption coefficient of the suspended population.
    pub k1: f64,
    /// Death rate of suspended biomass.
    pub k_q: f64,
    /// Attachment rate of suspended cells to the biofilm.
    pub alpha: f64,
    /// Biomass density inside the biofilm.
    pub rho: f64,
    /// Conversion factor between biofilm thickness and suspended biomass.
    pub beta: f64,
    /// Inlet substrate concentration `S*`.
    pub s_star: f64,
}

impl ModelParams {
    /// Reference parameter set (all constants equal to one) with the given inlet concentration.
    pub fn reference(s_star: f64) -> Self {
        Self {
            kappa: 1.0,
            dilution: 1.0,
            k1: 1.0,
            k_q: 1.0,
            alpha: 1.0,
            rho: 1.0,
            beta: 1.0,
            s_star,
        }
    }

    pub fn k2(&self) -> f64 {
        self.dilution + self.k_q
    }

    pub fn validate(&self) -> Result<(), KineticsError> {
        positive("kappa", self.kappa)?;
        positive("D", self.dilution)?;
        positive("k1", self.k1)?;
        positive("kQ", self.k_q)?;
        positive("alpha", self.alpha)?;
        positive("rho", self.rho)?;
        positive("beta", self.beta)?;
        positive("sstar", self.s_star)
    }

    pub fn with_s_star(mut self, s_star: f64) -> Self {
        self.s_star = s_star;
        self
    }
}

/// Family used for the uptake rate `r` and the planktonic growth rate `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GrowthLaw {
    /// `mu c / (k + c)`
    Monod { mu: f64, k: f64 },
    /// `slope c`
    Linear { slope: f64 },
}

impl GrowthLaw {
    #[inline]
    pub fn value(&self, c: f64) -> f64 {
        match *self {
            GrowthLaw::Monod { mu, k } => mu * c / (k + c),
            GrowthLaw::Linear { slope } => slope * c,
        }
    }

    #[inline]
    pub fn derivative(&self, c: f64) -> f64 {
        match *self {
            GrowthLaw::Monod { mu, k } => mu * k / ((k + c) * (k + c)),
            GrowthLaw::Linear { slope } => slope,
        }
    }

    fn validate(&self) -> Result<(), KineticsError> {
        match *self {
            GrowthLaw::Monod { mu, k } => {
                positive("mu", mu)?;
                positive("K", k)
            }
            GrowthLaw::Linear { slope } => positive("slope", slope),
        }
    }
}

/// Net growth `g(s)` of the biofilm as a function of the local uptake rate `s = r(c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NetGrowthLaw {
    /// `a (s - b)`
    Affine { a: f64, b: f64 },
    /// `g_max s / (k + s) - b`
    Saturating { g_max: f64, k: f64, b: f64 },
}

impl NetGrowthLaw {
    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            NetGrowthLaw::Affine { a, b } => a * (s - b),
            NetGrowthLaw::Saturating { g_max, k, b } => g_max * s / (k + s) - b,
        }
    }

    #[inline]
    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            NetGrowthLaw::Affine { a, .. } => a,
            NetGrowthLaw::Saturating { g_max, k, .. } => g_max * k / ((k + s) * (k + s)),
        }
    }

    /// `(a, b)` when the law is affine.
    pub fn affine(&self) -> Option<(f64, f64)> {
        match *self {
            NetGrowthLaw::Affine { a, b } => Some((a, b)),
            _ => None,
        }
    }

    fn validate(&self) -> Result<(), KineticsError> {
        match *self {
            NetGrowthLaw::Affine { a, b } => {
                positive("a", a)?;
                positive("b", b)
            }
            NetGrowthLaw::Saturating { g_max, k, b } => {
                positive("g_max", g_max)?;
                positive("K", k)?;
                positive("b", b)
            }
        }
    }
}

/// Wall detachment rate `d(h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DetachmentLaw {
    /// `d0 h`
    Linear { d0: f64 },
    /// `d0`
    Constant { d0: f64 },
}

impl DetachmentLaw {
    #[inline]
    pub fn value(&self, h: f64) -> f64 {
        match *self {
            DetachmentLaw::Linear { d0 } => d0 * h,
            DetachmentLaw::Constant { d0 } => d0,
        }
    }

    #[inline]
    pub fn derivative(&self, _h: f64) -> f64 {
        match *self {
            DetachmentLaw::Linear { d0 } => d0,
            DetachmentLaw::Constant { .. } => 0.0,
        }
    }

    /// Smallest `h >= 0` with `d(x) >= level` for every `x >= h`, if it exists.
    pub fn level_crossing(&self, level: f64) -> Option<f64> {
        match *self {
            DetachmentLaw::Linear { d0 } => Some((level / d0).max(0.0)),
            DetachmentLaw::Constant { d0 } => (d0 >= level).then_some(0.0),
        }
    }

    fn validate(&self) -> Result<(), KineticsError> {
        match *self {
            DetachmentLaw::Linear { d0 } | DetachmentLaw::Constant { d0 } => positive("d0", d0),
        }
    }
}

/// The four model functions.
///
/// The short accessors (`r`, `nu`, `g`, `d` and their `d*` derivatives) do no
/// domain checking and are what the solvers call in their inner loops. The
/// `eval_*` variants reject negative arguments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KineticsSet {
    pub uptake: GrowthLaw,
    pub planktonic: GrowthLaw,
    pub net_growth: NetGrowthLaw,
    pub detachment: DetachmentLaw,
}

macro_rules! checked {
    ($name:ident, $label:literal, $inner:ident) => {
        pub fn $name(&self, x: f64) -> Result<f64, KineticsError> {
            if x < 0.0 || x.is_nan() {
                return Err(KineticsError::NegativeArgument { name: $label, value: x });
            }
            Ok(self.$inner(x))
        }
    };
}

impl KineticsSet {
    /// Monod uptake (4, 1), Monod planktonic growth (2, 1), `g(s) = s - 2`, `d(h) = h`.
    pub fn reference() -> Self {
        Self {
            uptake: GrowthLaw::Monod { mu: 4.0, k: 1.0 },
            planktonic: GrowthLaw::Monod { mu: 2.0, k: 1.0 },
            net_growth: NetGrowthLaw::Affine { a: 1.0, b: 2.0 },
            detachment: DetachmentLaw::Linear { d0: 1.0 },
        }
    }

    pub fn validate(&self) -> Result<(), KineticsError> {
        self.uptake.validate()?;
        self.planktonic.validate()?;
        self.net_growth.validate()?;
        self.detachment.validate()
    }

    #[inline]
    pub fn r(&self, c: f64) -> f64 {
        self.uptake.value(c)
    }
    #[inline]
    pub fn dr(&self, c: f64) -> f64 {
        self.uptake.derivative(c)
    }
    #[inline]
    pub fn nu(&self, s: f64) -> f64 {
        self.planktonic.value(s)
    }
    #[inline]
    pub fn dnu(&self, s: f64) -> f64 {
        self.planktonic.derivative(s)
    }
    #[inline]
    pub fn g(&self, s: f64) -> f64 {
        self.net_growth.value(s)
    }
    #[inline]
    pub fn dg(&self, s: f64) -> f64 {
        self.net_growth.derivative(s)
    }
    #[inline]
    pub fn d(&self, h: f64) -> f64 {
        self.detachment.value(h)
    }
    #[inline]
    pub fn dd(&self, h: f64) -> f64 {
        self.detachment.derivative(h)
    }

    checked!(eval_r, "r", r);
    checked!(eval_r_prime, "r'", dr);
    checked!(eval_nu, "nu", nu);
    checked!(eval_nu_prime, "nu'", dnu);
    checked!(eval_g, "g", g);
    checked!(eval_g_prime, "g'", dg);
    checked!(eval_d, "d", d);
    checked!(eval_d_prime, "d'", dd);
}

/// One structural condition with the quantities it was decided on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub holds: bool,
    pub values: Vec<(&'static str, f64)>,
    pub note: Option<String>,
}

impl Check {
    fn new(name: &'static str, holds: bool) -> Self {
        Self { name, holds, values: Vec::new(), note: None }
    }

    fn value(mut self, label: &'static str, v: f64) -> Self {
        self.values.push((label, v));
        self
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Every structural condition used by the washout, existence, uniqueness and
/// stability results, evaluated for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// `g` locally Lipschitz.
    pub g0: Check,
    /// `r` nondecreasing, `s r(s) > 0` for `s != 0`.
    pub g1: Check,
    /// `nu(0) = 0`, `nu, d > 0` on `(0, inf)`.
    pub g2: Check,
    /// `g` affine.
    pub affine_g: Check,
    /// `nu` nondecreasing and `d` strictly increasing.
    pub h1: Check,
    /// `k2 > nu(S*)` and `g(r(S*))(alpha + k2 - nu(S*)) > d(0)(k2 - nu(S*))`.
    pub h2: Check,
    /// `alpha / (a (alpha + k2)) <= beta k1 kappa / rho`.
    pub h3a: Check,
    /// `nu'(S) / (alpha + k2 - nu(S))^2` strictly monotone on `[0, S*]` (grid test).
    pub h3b: Check,
    /// Closed-form version of `h3b` for Monod growth: `alpha + k2 != mu_nu`.
    pub h3b_analytic: Option<Check>,
    /// Two-sided bound on `beta k1 kappa / rho` guaranteeing local stability.
    pub hh3: Check,
    /// `alpha + k2 > nu(S*)`.
    pub n1: Check,
    /// `g(r(S*))(alpha + k2 - nu(S*)) > d(0)(k2 - nu(S*))`.
    pub n2: Check,
    /// Additional hypotheses of the general existence theorem: `g(0) < 0`, `nu` increasing, `d(h) h -> inf`.
    pub existence_extra: Check,
    /// First washout stability inequality.
    pub s1: Check,
    /// Second washout stability inequality.
    pub s2: Check,
    /// Hypotheses for global stability of the washout state.
    pub washout_global: Check,
}

impl AssumptionReport {
    pub fn basic(&self) -> bool {
        self.g0.holds && self.g1.holds && self.g2.holds
    }

    /// The uniqueness hypotheses used by the shooting construction.
    pub fn uniqueness(&self) -> bool {
        self.h1.holds && self.h2.holds && (self.h3a.holds || self.h3b.holds)
    }

    pub fn existence(&self) -> bool {
        self.n1.holds && self.n2.holds && self.existence_extra.holds
    }

    pub fn checks(&self) -> Vec<&Check> {
        let mut out = vec![
            &self.g0,
            &self.g1,
            &self.g2,
            &self.affine_g,
            &self.h1,
            &self.h2,
            &self.h3a,
            &self.h3b,
        ];
        if let Some(c) = &self.h3b_analytic {
            out.push(c);
        }
        out.extend([
            &self.hh3,
            &self.n1,
            &self.n2,
            &self.existence_extra,
            &self.s1,
            &self.s2,
            &self.washout_global,
        ]);
        out
    }
}

/// Number of grid points for the sampled monotonicity test.
pub const MONOTONE_GRID: usize = 1024;
/// Minimum consecutive difference counted as strict.
pub const MONOTONE_TOL: f64 = 1e-12;

/// Strict monotonicity of `nu'(S) / (alpha + k2 - nu(S))^2` on a uniform grid over `[0, S*]`.
pub fn h3b_grid(params: &ModelParams, kin: &KineticsSet) -> bool {
    let c = params.alpha + params.k2();
    let phi = |s: f64| {
        let den = c - kin.nu(s);
        if den <= 0.0 {
            f64::NAN
        } else {
            kin.dnu(s) / (den * den)
        }
    };
    let n = MONOTONE_GRID;
    let vals: Vec<f64> = (0..n).map(|i| phi(params.s_star * i as f64 / (n - 1) as f64)).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let inc = vals.windows(2).all(|w| w[1] - w[0] > MONOTONE_TOL);
    let dec = vals.windows(2).all(|w| w[0] - w[1] > MONOTONE_TOL);
    inc || dec
}

pub fn validate_assumptions(params: &ModelParams, kin: &KineticsSet) -> AssumptionReport {
    let k2 = params.k2();
    let alpha = params.alpha;
    let s_star = params.s_star;
    let nu_s = kin.nu(s_star);
    let g_rs = kin.g(kin.r(s_star));
    let d0 = kin.d(0.0);
    let delta_s = alpha + k2 - nu_s;
    let group = params.beta * params.k1 * params.kappa / params.rho;

    // Every shipped family is locally Lipschitz, C^1, and sign-correct for positive parameters.
    let families_ok = kin.validate().is_ok() && params.validate().is_ok();
    let g0 = Check::new("G0", families_ok).note("closed families are C^1");
    let g1 = Check::new("G1", families_ok).note("r nondecreasing with s r(s) > 0");
    let g2 = Check::new("G2", families_ok)
        .value("nu(0)", kin.nu(0.0))
        .value("d(0)", d0);

    let affine = kin.net_growth.affine();
    let affine_g = Check::new("gg", affine.is_some());

    let d_strict = matches!(kin.detachment, DetachmentLaw::Linear { .. });
    let h1 = Check::new("h1", d_strict)
        .note("nu nondecreasing; d strictly increasing only for the linear family");

    let h2_left = g_rs * delta_s;
    let h2_right = d0 * (k2 - nu_s);
    let h2 = Check::new("h2", k2 > nu_s && h2_left > h2_right)
        .value("k2", k2)
        .value("nu(S*)", nu_s)
        .value("g(r(S*))*(alpha+k2-nu(S*))", h2_left)
        .value("d(0)*(k2-nu(S*))", h2_right);

    let h3a = match affine {
        Some((a, _)) => {
            let lhs = alpha / (a * (alpha + k2));
            Check::new("h3a", lhs <= group)
                .value("alpha/(a(alpha+k2))", lhs)
                .value("beta*k1*kappa/rho", group)
        }
        None => Check::new("h3a", false).note("requires affine g"),
    };

    let h3b = Check::new("h3b", h3b_grid(params, kin)).value("grid_points", MONOTONE_GRID as f64);
    let h3b_analytic = match kin.planktonic {
        GrowthLaw::Monod { mu, .. } => Some(
            Check::new("h3b_monod", alpha + k2 != mu && alpha + k2 > nu_s)
                .value("alpha+k2", alpha + k2)
                .value("mu_nu", mu),
        ),
        GrowthLaw::Linear { .. } => None,
    };

    let hh3 = match affine {
        Some((a, b)) => {
            let lower = (0.5 / a).max(b / (alpha + k2)).max(alpha / (a * (alpha + k2)));
            let upper = 2.0 * alpha / (a * nu_s);
            Check::new("hh3", lower <= group && group <= upper)
                .value("lower", lower)
                .value("beta*k1*kappa/rho", group)
                .value("upper", upper)
        }
        None => Check::new("hh3", false).note("requires affine g"),
    };

    let n1 = Check::new("n1", delta_s > 0.0).value("alpha+k2-nu(S*)", delta_s);
    let n2 = Check::new("n2", h2_left > h2_right)
        .value("g(r(S*))*(alpha+k2-nu(S*))", h2_left)
        .value("d(0)*(k2-nu(S*))", h2_right);
    let g_at_zero = kin.g(0.0);
    let existence_extra = Check::new("existence_extra", g_at_zero < 0.0).value("g(0)", g_at_zero);

    let s1_left = d0 * (nu_s - k2);
    let s1_right = g_rs * (nu_s - k2 - alpha);
    let s1 = Check::new("S1", s1_left < s1_right)
        .value("d(0)*(nu(S*)-k2)", s1_left)
        .value("g(r(S*))*(nu(S*)-k2-alpha)", s1_right);
    let s2_left = nu_s - k2 - alpha;
    let s2_right = d0 - g_rs;
    let s2 = Check::new("S2", s2_left < s2_right)
        .value("nu(S*)-k2-alpha", s2_left)
        .value("d(0)-g(r(S*))", s2_right);

    // g, nu nondecreasing and d(x) >= d(0) hold for every shipped family.
    let washout_global = Check::new("washout_global", s1.holds && nu_s < k2)
        .value("nu(S*)", nu_s)
        .value("k2", k2);

    AssumptionReport {
        g0,
        g1,
        g2,
        affine_g,
        h1,
        h2,
        h3a,
        h3b,
        h3b_analytic,
        hh3,
        n1,
        n2,
        existence_extra,
        s1,
        s2,
        washout_global,
    }
}
