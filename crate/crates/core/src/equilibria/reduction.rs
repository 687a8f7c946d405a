use serde::Serialize;

use super::{h_star_cap, EquilibriumError, EquilibriumPoint, Method};
use crate::kinetics::{validate_assumptions, KineticsSet, ModelParams};
use crate::numerics::roots::{brent_with_values, RootError, ROOT_XTOL};
use crate::substrate_bvp::{solve_profile_warm, BvpError, BvpOptions};

/// Substrate balance `E(h, S)` of a steady state with `Q` eliminated.
fn substrate_balance(
    h: f64,
    s: f64,
    kin: &KineticsSet,
    params: &ModelParams,
    bvp: &BvpOptions,
    warm: &mut Option<Vec<f64>>,
) -> Result<f64, BvpError> {
    let p = solve_profile_warm(h, s, kin, params, bvp, warm.as_deref())?;
    let uptake = if h == 0.0 { 0.0 } else { params.rho / h * p.flux_scaled };
    let nu = kin.nu(s);
    let val = params.dilution * s
        + uptake
        + params.k1 * params.beta * nu * kin.d(h) * h / (params.alpha + params.k2() - nu);
    *warm = Some(p.u);
    Ok(val)
}

fn root_err(e: RootError<BvpError>) -> EquilibriumError {
    match e {
        RootError::Eval(b) => EquilibriumError::Bvp(b),
        other => EquilibriumError::Numerical(other.to_string()),
    }
}

/// The bulk substrate `S(h)` of a steady state with thickness `h`: the root of `E(h, S) = D S*`.
pub fn s_of_h_general(
    h: f64,
    params: &ModelParams,
    kin: &KineticsSet,
    bvp: &BvpOptions,
) -> Result<f64, EquilibriumError> {
    if !(h >= 0.0) {
        return Err(EquilibriumError::Numerical(format!("thickness must be nonnegative, got {h}")));
    }
    let target = params.dilution * params.s_star;
    if h == 0.0 {
        return Ok(params.s_star);
    }
    let mut warm = None;
    let top = substrate_balance(h, params.s_star, kin, params, bvp, &mut warm)? - target;
    if top < 0.0 {
        return Err(EquilibriumError::Numerical(format!("E({h}, S*) < D S*: thickness infeasible")));
    }
    // E(h, 0) = 0 < D S*
    let root = brent_with_values(
        |s| substrate_balance(h, s, kin, params, bvp, &mut warm).map(|v| v - target),
        0.0,
        params.s_star,
        -target,
        top,
        ROOT_XTOL,
    )
    .map_err(root_err)?;
    Ok(root.x)
}

/// `G(h)`: the thickness balance along the curve `S = S(h)`; its zeros are the steady states.
pub fn reduced_growth(
    h: f64,
    params: &ModelParams,
    kin: &KineticsSet,
    bvp: &BvpOptions,
) -> Result<(f64, f64), EquilibriumError> {
    let s = s_of_h_general(h, params, kin, bvp)?;
    let p = solve_profile_warm(h, s, kin, params, bvp, None)?;
    let growth = p.integrate(|u| kin.g(kin.r(u)));
    let delta = params.alpha + params.k2() - kin.nu(s);
    Ok((growth - kin.d(h) * (1.0 - params.alpha / delta), s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanOptions {
    pub h_min: f64,
    /// Largest thickness scanned; defaults to ten times the shooting cap for affine `g`, else 1e3.
    pub h_cap: Option<f64>,
    pub bvp: BvpOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { h_min: 1e-4, h_cap: None, bvp: BvpOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionResult {
    pub points: Vec<EquilibriumPoint>,
    /// Why the search was skipped, if it was.
    pub diagnostic: Option<String>,
    /// `(h, G(h))` on the scan grid.
    pub scan: Vec<(f64, f64)>,
}

/// All zeros of `G` found on a geometric grid in `h`, each refined by Brent's method.
pub fn find_equilibrium_reduction(
    params: &ModelParams,
    kin: &KineticsSet,
    opts: &ScanOptions,
) -> Result<ReductionResult, EquilibriumError> {
    let report = validate_assumptions(params, kin);
    let failed: Vec<&str> = [&report.n1, &report.n2, &report.existence_extra]
        .iter()
        .filter(|c| !c.holds)
        .map(|c| c.name)
        .collect();
    if !failed.is_empty() {
        return Ok(ReductionResult {
            points: Vec::new(),
            diagnostic: Some(format!("existence conditions fail: {}", failed.join(", "))),
            scan: Vec::new(),
        });
    }

    let cap = match opts.h_cap {
        Some(c) => c,
        None if kin.net_growth.affine().is_some() => 10.0 * h_star_cap(params, kin)?,
        None => 1e3,
    };
    let g = |h: f64| reduced_growth(h, params, kin, &opts.bvp).map(|(v, _)| v);

    let g0 = g(0.0)?;
    if !(g0 > 0.0) {
        return Err(EquilibriumError::ModelViolation(format!("G(0) = {g0} is not positive")));
    }
    let mut scan = vec![(0.0, g0)];
    let mut h = opts.h_min;
    while h <= cap {
        scan.push((h, g(h)?));
        h *= 2.0;
    }

    let mut points = Vec::new();
    for w in scan.windows(2) {
        let ((a, fa), (b, fb)) = (w[0], w[1]);
        if fa == 0.0 && a > 0.0 {
            let s = s_of_h_general(a, params, kin, &opts.bvp)?;
            points.push(EquilibriumPoint::assemble(a, s, Method::Reduction, None, kin, params, &opts.bvp)?);
            continue;
        }
        if fa.signum() == fb.signum() || fb == 0.0 {
            continue;
        }
        let root = brent_with_values(|x| g(x), a, b, fa, fb, ROOT_XTOL).map_err(|e| match e {
            RootError::Eval(inner) => inner,
            other => EquilibriumError::Numerical(other.to_string()),
        })?;
        let s = s_of_h_general(root.x, params, kin, &opts.bvp)?;
        points.push(EquilibriumPoint::assemble(root.x, s, Method::Reduction, None, kin, params, &opts.bvp)?);
    }
    if points.is_empty() {
        return Err(EquilibriumError::NotFound(format!("G keeps its sign on [0, {cap}]")));
    }
    Ok(ReductionResult { points, diagnostic: None, scan })
}
