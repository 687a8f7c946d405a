use serde::Serialize;

use crate::kinetics::{validate_assumptions, KineticsSet, ModelParams};

/// Eigenvalues closer to zero than this are reported as marginal.
pub const MARGIN: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LocalVerdict {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GlobalVerdict {
    GloballyStable,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WashoutReport {
    pub jacobian: [[f64; 3]; 3],
    /// `g(r(S*)) - d(0)`
    pub p: f64,
    /// `nu(S*) - k2 - alpha`
    pub q: f64,
    pub lambda0: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub s1: bool,
    pub s2: bool,
    pub local_verdict: LocalVerdict,
    pub global_verdict: GlobalVerdict,
}

/// Jacobian of the reactor right-hand side at `(0, S*, 0)`.
pub fn washout_jacobian(params: &ModelParams, kin: &KineticsSet) -> [[f64; 3]; 3] {
    let s = params.s_star;
    let d0 = kin.d(0.0);
    [
        [kin.g(kin.r(s)) - d0, 0.0, params.alpha / params.beta],
        [-params.rho * kin.r(s) / params.kappa, -params.dilution, -params.k1 * kin.nu(s)],
        [params.beta * d0, 0.0, kin.nu(s) - params.k2() - params.alpha],
    ]
}

pub fn washout_analysis(params: &ModelParams, kin: &KineticsSet) -> WashoutReport {
    let jacobian = washout_jacobian(params, kin);
    let p = jacobian[0][0];
    let q = jacobian[2][2];
    let d0 = kin.d(0.0);
    // (p - q)^2 + 4 alpha d(0) >= 0, so both roots are real
    let disc = ((p - q).powi(2) + 4.0 * params.alpha * d0).sqrt();
    let lambda_plus = 0.5 * (p + q + disc);
    let lambda_minus = 0.5 * (p + q - disc);

    let report = validate_assumptions(params, kin);
    let local_verdict = if lambda_plus < -MARGIN {
        LocalVerdict::Stable
    } else if lambda_plus > MARGIN {
        LocalVerdict::Unstable
    } else {
        LocalVerdict::Marginal
    };
    let global_verdict = if report.washout_global.holds {
        GlobalVerdict::GloballyStable
    } else {
        GlobalVerdict::Unknown
    };
    WashoutReport {
        jacobian,
        p,
        q,
        lambda0: -params.dilution,
        lambda_plus,
        lambda_minus,
        s1: report.s1.holds,
        s2: report.s2.holds,
        local_verdict,
        global_verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_inflow_is_stable() {
        let w = washout_analysis(&ModelParams::reference(0.5), &KineticsSet::reference());
        assert!((w.p + 2.0 / 3.0).abs() < 1e-14);
        assert!((w.q + 7.0 / 3.0).abs() < 1e-14);
        assert!((w.lambda_plus + 2.0 / 3.0).abs() < 1e-14);
        assert!((w.lambda_minus + 7.0 / 3.0).abs() < 1e-14);
        assert_eq!(w.lambda0, -1.0);
        assert!(w.s1 && w.s2);
        assert_eq!(w.local_verdict, LocalVerdict::Stable);
        assert_eq!(w.global_verdict, GlobalVerdict::GloballyStable);
    }

    #[test]
    fn large_inflow_is_unstable() {
        let w = washout_analysis(&ModelParams::reference(5.0), &KineticsSet::reference());
        assert!((w.lambda_plus - 4.0 / 3.0).abs() < 1e-14);
        assert!((w.lambda_minus + 4.0 / 3.0).abs() < 1e-14);
        assert_eq!(w.local_verdict, LocalVerdict::Unstable);
        assert_eq!(w.global_verdict, GlobalVerdict::Unknown);
    }

    #[test]
    fn zero_net_growth_is_marginal() {
        // r(1) = 2 = b, so g(r(S*)) = 0 = d(0)
        let w = washout_analysis(&ModelParams::reference(1.0), &KineticsSet::reference());
        assert_eq!(w.lambda_plus, 0.0);
        assert_eq!(w.local_verdict, LocalVerdict::Marginal);
    }
}
