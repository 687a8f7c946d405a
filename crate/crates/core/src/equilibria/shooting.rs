//! Shooting construction of the nontrivial equilibrium for affine net growth
//! `g(s) = a (s - b)`.
//!
//! With `g` affine the steady-state conditions collapse to a closed-form
//! relation `F(h, S) = D S*` between thickness and bulk substrate, giving a
//! decreasing curve `S(h)` on `[0, h_*]`. Shooting from the substratum with
//! `c(0) = mu`, `c'(0) = 0` and matching `c(h) = S(h)` gives `h(mu)`, and the
//! remaining flux condition is the scalar equation `B(mu) = 0`.

use std::convert::Infallible;

use super::{EquilibriumError, EquilibriumPoint, Method};
use crate::kinetics::{validate_assumptions, KineticsSet, ModelParams};
use crate::numerics::ode::{solve_ivp, IvpSolution, OdeError, OdeOptions};
use crate::numerics::roots::{bisect, brent, golden_section_min, RootError, ROOT_XTOL};
use crate::substrate_bvp::BvpOptions;

pub const SHOOT_RTOL: f64 = 1e-12;
pub const SHOOT_ATOL: f64 = 1e-14;
/// Uniform `mu` grid used to bracket the zero of `B`.
pub const MU_GRID: usize = 256;

fn num<E: std::fmt::Display>(e: E) -> EquilibriumError {
    EquilibriumError::Numerical(e.to_string())
}

fn root_err(e: RootError<EquilibriumError>) -> EquilibriumError {
    match e {
        RootError::Eval(inner) => inner,
        other => num(other),
    }
}

fn affine_coefficients(kin: &KineticsSet) -> Result<(f64, f64), EquilibriumError> {
    kin.net_growth
        .affine()
        .ok_or_else(|| EquilibriumError::Unsupported("the shooting construction needs affine net growth g(s) = a(s - b)".into()))
}

fn ode_options() -> OdeOptions {
    OdeOptions { rtol: SHOOT_RTOL, atol: SHOOT_ATOL, ..Default::default() }
}

/// Joint state `(c, c', w, w')` of the profile IVP and its variational equation.
fn shooting_rhs<'a>(kin: &'a KineticsSet, kappa: f64) -> impl FnMut(f64, &[f64]) -> Result<Vec<f64>, Infallible> + 'a {
    move |_z, y| {
        let c = y[0].max(0.0);
        Ok(vec![y[1], kin.r(c) / kappa, y[3], kin.dr(c) * y[2] / kappa])
    }
}

/// Solution of `kappa c'' = r(c)`, `kappa w'' = r'(c) w` from `c(0) = mu`, `w(0) = 1`.
#[derive(Debug, Clone)]
pub struct ShootingProfile {
    pub mu: f64,
    pub z_max: f64,
    solution: IvpSolution,
}

impl ShootingProfile {
    /// `[c, c', w, w']` at `z` in `[0, z_max]`.
    pub fn eval(&self, z: f64) -> [f64; 4] {
        let v = self.solution.eval(z.clamp(0.0, self.z_max));
        [v[0], v[1], v[2], v[3]]
    }

    /// Integration nodes.
    pub fn nodes(&self) -> &[f64] {
        &self.solution.t
    }

    /// States at the integration nodes.
    pub fn states(&self) -> &[Vec<f64>] {
        &self.solution.y
    }
}

pub fn shoot_profile(mu: f64, z_max: f64, kin: &KineticsSet, params: &ModelParams) -> Result<ShootingProfile, EquilibriumError> {
    if !(mu >= 0.0) || !(z_max > 0.0) {
        return Err(num(format!("shooting needs mu >= 0 and z_max > 0, got mu = {mu}, z_max = {z_max}")));
    }
    let solution = solve_ivp(shooting_rhs(kin, params.kappa), 0.0, &[mu, 0.0, 1.0, 0.0], z_max, &ode_options())
        .map_err(|e: OdeError<Infallible>| num(e))?;
    Ok(ShootingProfile { mu, z_max, solution })
}

/// `[c, c', w, w']` at exactly `z`, integrating from the substratum.
pub fn shoot_at(mu: f64, z: f64, kin: &KineticsSet, params: &ModelParams) -> Result<[f64; 4], EquilibriumError> {
    if z == 0.0 {
        return Ok([mu, 0.0, 1.0, 0.0]);
    }
    let sol = solve_ivp(shooting_rhs(kin, params.kappa), 0.0, &[mu, 0.0, 1.0, 0.0], z, &ode_options())
        .map_err(|e: OdeError<Infallible>| num(e))?;
    let y = sol.last();
    Ok([y[0], y[1], y[2], y[3]])
}

/// Closed-form `F(h, S)`; steady states satisfy `F(h, S) = D S*`.
pub fn f_closed_form(h: f64, s: f64, a: f64, b: f64, params: &ModelParams, kin: &KineticsSet) -> f64 {
    let k2 = params.k2();
    let nu = kin.nu(s);
    let rk = params.rho / (a * params.kappa);
    params.dilution * s
        + params.rho * b * h / params.kappa
        + kin.d(h) * h / (params.alpha + k2 - nu) * ((params.k1 * params.beta - rk) * nu + rk * k2)
}

/// Thickness `h_*` at which the steady-state curve reaches `S = 0`.
pub fn h_star_cap(params: &ModelParams, kin: &KineticsSet) -> Result<f64, EquilibriumError> {
    let (a, b) = affine_coefficients(kin)?;
    let target = params.dilution * params.s_star;
    let f = |h: f64| Ok::<_, Infallible>(f_closed_form(h, 0.0, a, b, params, kin) - target);
    let mut hi = 1.0;
    while f(hi).unwrap() < 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(num("F(h, 0) stays below D S*"));
        }
    }
    let root = brent(f, 0.0, hi, ROOT_XTOL).map_err(num)?;
    Ok(root.x)
}

/// Validated data of the shooting construction for one parameter set.
#[derive(Debug, Clone)]
pub struct ShootingContext<'a> {
    pub params: &'a ModelParams,
    pub kin: &'a KineticsSet,
    pub a: f64,
    pub b: f64,
    pub h_star: f64,
    /// `partial_S F > 0` everywhere, so `S(h)` is a plain monotone root.
    pub monotone_f: bool,
}

impl<'a> ShootingContext<'a> {
    pub fn new(params: &'a ModelParams, kin: &'a KineticsSet) -> Result<Self, EquilibriumError> {
        let (a, b) = affine_coefficients(kin)?;
        let report = validate_assumptions(params, kin);
        if !report.basic() {
            return Err(EquilibriumError::Unsupported("basic structural assumptions fail".into()));
        }
        if !report.uniqueness() {
            let failed: Vec<&str> = [&report.h1, &report.h2]
                .into_iter()
                .filter(|c| !c.holds)
                .map(|c| c.name)
                .chain((!report.h3a.holds && !report.h3b.holds).then_some("h3a/h3b"))
                .collect();
            return Err(EquilibriumError::ConditionsFail(failed.join(", ")));
        }
        let h_star = h_star_cap(params, kin)?;
        Ok(Self { params, kin, a, b, h_star, monotone_f: report.h3a.holds })
    }

    pub fn f(&self, h: f64, s: f64) -> f64 {
        f_closed_form(h, s, self.a, self.b, self.params, self.kin)
    }

    fn delta(&self, s: f64) -> f64 {
        self.params.alpha + self.params.k2() - self.kin.nu(s)
    }

    /// Unique `S` in `[0, S*]` with `F(h, S) = D S*`.
    pub fn s_of_h(&self, h: f64) -> Result<f64, EquilibriumError> {
        let s_star = self.params.s_star;
        if !(h >= 0.0) || h > self.h_star * (1.0 + 1e-12) {
            return Err(num(format!("thickness {h} outside [0, {}]", self.h_star)));
        }
        if h == 0.0 {
            return Ok(s_star);
        }
        if h >= self.h_star {
            return Ok(0.0);
        }
        let target = self.params.dilution * s_star;
        let phi = |s: f64| Ok::<_, Infallible>(self.f(h, s) - target);
        let (lo, hi) = if self.monotone_f {
            (0.0, s_star)
        } else {
            // F(h, .) is convex or concave: the crossing lies on the side of the extremum where F rises
            let s_min = golden_section_min(phi, 0.0, s_star, 1e-10).unwrap();
            if phi(s_min).unwrap() < phi(0.0).unwrap().min(phi(s_star).unwrap()) {
                (s_min, s_star)
            } else {
                let s_max = golden_section_min(|s| phi(s).map(|v| -v), 0.0, s_star, 1e-10).unwrap();
                (0.0, s_max)
            }
        };
        brent(phi, lo, hi, ROOT_XTOL).map(|r| r.x).map_err(num)
    }

    /// Thickness at which the profile shot from `mu` meets the steady-state curve.
    pub fn h_of_mu(&self, mu: f64) -> Result<f64, EquilibriumError> {
        let s_star = self.params.s_star;
        if !(0.0..=s_star).contains(&mu) {
            return Err(num(format!("mu = {mu} outside [0, S*]")));
        }
        if mu == s_star {
            return Ok(0.0);
        }
        if mu == 0.0 {
            return Ok(self.h_star);
        }
        let gap = |z: f64| -> Result<f64, EquilibriumError> {
            Ok(shoot_at(mu, z, self.kin, self.params)?[0] - self.s_of_h(z)?)
        };
        let lo = gap(0.0)?;
        let hi = gap(self.h_star)?;
        if !(lo < 0.0 && hi > 0.0) {
            return Err(EquilibriumError::ModelViolation(format!(
                "matching function has no sign change for mu = {mu}: A(0) = {lo}, A(h_*) = {hi}"
            )));
        }
        crate::numerics::roots::brent_with_values(gap, 0.0, self.h_star, lo, hi, ROOT_XTOL)
            .map(|r| r.x)
            .map_err(root_err)
    }

    /// Flux mismatch `B(mu)`; the equilibrium is its unique zero in `(0, mu_underline]`.
    pub fn b(&self, mu: f64) -> Result<f64, EquilibriumError> {
        let h = self.h_of_mu(mu)?;
        let s = self.s_of_h(h)?;
        let dc = if h == 0.0 { 0.0 } else { shoot_at(mu, h, self.kin, self.params)?[1] };
        let k2 = self.params.k2();
        Ok(self.a * self.params.kappa * dc
            - self.a * self.b * h
            - (k2 - self.kin.nu(s)) / self.delta(s) * self.kin.d(h) * h)
    }

    /// `M(0, mu)`, the growth balance at the substratum; strictly decreasing in `mu`.
    pub fn m(&self, mu: f64) -> Result<f64, EquilibriumError> {
        let h = self.h_of_mu(mu)?;
        let s = self.s_of_h(h)?;
        let k2 = self.params.k2();
        Ok(-self.a * (self.kin.r(mu) - self.b) + (k2 - self.kin.nu(s)) / self.delta(s) * self.kin.d(h))
    }

    pub fn mu_underline(&self) -> Result<f64, EquilibriumError> {
        let s_star = self.params.s_star;
        let m0 = self.m(0.0)?;
        let m1 = self.m(s_star)?;
        if !(m0 > 0.0 && m1 < 0.0) {
            return Err(EquilibriumError::ModelViolation(format!("M(0, 0) = {m0}, M(0, S*) = {m1}")));
        }
        bisect(|mu| self.m(mu), 0.0, s_star, ROOT_XTOL).map(|r| r.x).map_err(root_err)
    }

    pub fn find(&self, bvp: &BvpOptions) -> Result<EquilibriumPoint, EquilibriumError> {
        let s_star = self.params.s_star;
        let b0 = self.b(0.0)?;
        if !(b0 < 0.0) {
            return Err(EquilibriumError::ModelViolation(format!("B(0) = {b0} is not negative")));
        }
        let mut prev = (0.0, b0);
        let mut bracket = None;
        for i in 1..MU_GRID {
            let mu = s_star * i as f64 / MU_GRID as f64;
            let v = self.b(mu)?;
            if v >= 0.0 {
                bracket = Some((prev, (mu, v)));
                break;
            }
            prev = (mu, v);
        }
        let ((lo, flo), (hi, fhi)) =
            bracket.ok_or_else(|| EquilibriumError::NotFound("B has no sign change on [0, S*)".into()))?;
        let mu_star = crate::numerics::roots::brent_with_values(|mu| self.b(mu), lo, hi, flo, fhi, ROOT_XTOL)
            .map_err(root_err)?
            .x;
        let mu_bar = self.mu_underline()?;
        if mu_star > mu_bar + 1e-10 {
            return Err(EquilibriumError::ModelViolation(format!("mu* = {mu_star} exceeds mu_underline = {mu_bar}")));
        }
        let h = self.h_of_mu(mu_star)?;
        let s = self.s_of_h(h)?;
        EquilibriumPoint::assemble(h, s, Method::Shooting, Some(mu_star), self.kin, self.params, bvp)
    }
}

pub fn s_of_h_shooting(h: f64, params: &ModelParams, kin: &KineticsSet) -> Result<f64, EquilibriumError> {
    ShootingContext::new(params, kin)?.s_of_h(h)
}

pub fn h_of_mu(mu: f64, params: &ModelParams, kin: &KineticsSet) -> Result<f64, EquilibriumError> {
    ShootingContext::new(params, kin)?.h_of_mu(mu)
}

pub fn b_function(mu: f64, params: &ModelParams, kin: &KineticsSet) -> Result<f64, EquilibriumError> {
    ShootingContext::new(params, kin)?.b(mu)
}

pub fn m_function(mu: f64, params: &ModelParams, kin: &KineticsSet) -> Result<f64, EquilibriumError> {
    ShootingContext::new(params, kin)?.m(mu)
}

pub fn mu_underline(params: &ModelParams, kin: &KineticsSet) -> Result<f64, EquilibriumError> {
    ShootingContext::new(params, kin)?.mu_underline()
}

pub fn find_equilibrium_shooting(
    params: &ModelParams,
    kin: &KineticsSet,
    bvp: &BvpOptions,
) -> Result<EquilibriumPoint, EquilibriumError> {
    ShootingContext::new(params, kin)?.find(bvp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{GrowthLaw, NetGrowthLaw};

    fn reference() -> (ModelParams, KineticsSet) {
        (ModelParams::reference(5.0), KineticsSet::reference())
    }

    #[test]
    fn cap_solves_quadratic() {
        let (p, k) = reference();
        let exact = (-2.0 + (52.0f64 / 3.0).sqrt()) * 0.75;
        assert!((h_star_cap(&p, &k).unwrap() - exact).abs() < 1e-11);
    }

    #[test]
    fn cosh_shooting_for_linear_uptake() {
        let p = ModelParams::reference(5.0);
        let k = KineticsSet { uptake: GrowthLaw::Linear { slope: 1.0 }, ..KineticsSet::reference() };
        let sp = shoot_profile(1.0, 2.0, &k, &p).unwrap();
        for z in [0.0, 0.3, 1.0, 1.7, 2.0] {
            let v = sp.eval(z);
            assert!((v[0] - z.cosh()).abs() < 1e-9, "{z}");
            assert!((v[1] - z.sinh()).abs() < 1e-9);
            assert!((v[2] - z.cosh()).abs() < 1e-9);
        }
        let end = shoot_at(1.0, 2.0, &k, &p).unwrap();
        assert!((end[0] - 2f64.cosh()).abs() < 1e-10);
    }

    #[test]
    fn zero_center_stays_zero() {
        let (p, k) = reference();
        let sp = shoot_profile(0.0, 1.5, &k, &p).unwrap();
        for st in sp.states() {
            assert_eq!(st[0], 0.0);
            assert!(st[2] >= 1.0);
        }
        // kappa w'' = r'(0) w = 4 w
        assert!((sp.eval(1.5)[2] - 3f64.cosh()).abs() < 1e-9);
    }

    #[test]
    fn reference_shooting_values() {
        let (p, k) = reference();
        let ctx = ShootingContext::new(&p, &k).unwrap();
        assert!(ctx.monotone_f);
        assert!((ctx.b(0.0).unwrap() + 5.0).abs() < 1e-10);
        assert_eq!(ctx.b(5.0).unwrap(), 0.0);
        assert!((ctx.m(0.0).unwrap() - 3.0816659994661326).abs() < 1e-9);
        assert!((ctx.m(5.0).unwrap() + 4.0 / 3.0).abs() < 1e-12);
        assert!((ctx.mu_underline().unwrap() - 1.3925096012389626).abs() < 1e-9);
        let e = ctx.find(&BvpOptions::default()).unwrap();
        assert!((e.mu.unwrap() - 1.1561909872711027).abs() < 1e-9);
        assert!((e.h - 0.9225727806222737).abs() < 1e-9);
        assert!((e.s - 2.117811288741045).abs() < 1e-9);
    }

    #[test]
    fn endpoints_of_steady_state_curve() {
        let (p, k) = reference();
        let ctx = ShootingContext::new(&p, &k).unwrap();
        assert_eq!(ctx.s_of_h(0.0).unwrap(), 5.0);
        assert_eq!(ctx.s_of_h(ctx.h_star).unwrap(), 0.0);
        assert_eq!(ctx.h_of_mu(5.0).unwrap(), 0.0);
        assert_eq!(ctx.h_of_mu(0.0).unwrap(), ctx.h_star);
    }

    #[test]
    fn non_affine_growth_is_unsupported() {
        let p = ModelParams::reference(5.0);
        let k = KineticsSet { net_growth: NetGrowthLaw::Saturating { g_max: 3.0, k: 1.0, b: 1.0 }, ..KineticsSet::reference() };
        assert!(matches!(find_equilibrium_shooting(&p, &k, &BvpOptions::default()), Err(EquilibriumError::Unsupported(_))));
    }

    #[test]
    fn small_inflow_fails_conditions() {
        let p = ModelParams::reference(0.5);
        let k = KineticsSet::reference();
        assert!(matches!(find_equilibrium_shooting(&p, &k, &BvpOptions::default()), Err(EquilibriumError::ConditionsFail(_))));
    }
}
