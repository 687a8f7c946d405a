//! Local stability of a nontrivial equilibrium.
//!
//! The Jacobian at the equilibrium is assembled analytically from the
//! sensitivity integrals `G = int r'(u) d_S u` and `H = int r'(u) d_h u`.
//! Stability follows from the Routh–Hurwitz coefficients of its
//! characteristic polynomial, computed both directly from the matrix and from
//! fully expanded closed forms whose individual summands are nonnegative when
//! the two-sided bound on `beta k1 kappa / rho` holds.

use nalgebra::Matrix3;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::rhs_with_profile;
use crate::equilibria::EquilibriumPoint;
use crate::kinetics::{validate_assumptions, KineticsSet, ModelParams};
use crate::substrate_bvp::{sensitivity_integrals, BvpError, BvpMethod, BvpOptions};

/// Quantities closer to zero than this carry no sign information.
pub const VERDICT_MARGIN: f64 = 1e-10;
/// Default finite-difference step for [`jacobian_fd`].
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("substrate profile: {0}")]
    Bvp(#[from] BvpError),
}

pub type Mat3 = [[f64; 3]; 3];

/// Everything the Jacobian depends on, evaluated at one equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JacobianInputs {
    pub a: f64,
    pub b: f64,
    pub h: f64,
    pub delta: f64,
    /// `int r'(u) d_S u dy`
    pub g: f64,
    /// `int r'(u) d_h u dy`
    pub hh: f64,
    pub d: f64,
    pub dp: f64,
    pub nu: f64,
    pub nup: f64,
    pub rho: f64,
    pub kappa: f64,
    pub k1: f64,
    pub k2: f64,
    pub beta: f64,
    pub alpha: f64,
    pub dilution: f64,
}

impl JacobianInputs {
    pub fn at(eq: &EquilibriumPoint, params: &ModelParams, kin: &KineticsSet) -> Result<Self, StabilityError> {
        let (a, b) = kin
            .net_growth
            .affine()
            .ok_or_else(|| StabilityError::Unsupported("the equilibrium Jacobian needs affine net growth".into()))?;
        let gh = sensitivity_integrals(&eq.profile, kin, params)?;
        Ok(Self {
            a,
            b,
            h: eq.h,
            delta: eq.delta,
            g: gh.g,
            hh: gh.h,
            d: kin.d(eq.h),
            dp: kin.dd(eq.h),
            nu: kin.nu(eq.s),
            nup: kin.dnu(eq.s),
            rho: params.rho,
            kappa: params.kappa,
            k1: params.k1,
            k2: params.k2(),
            beta: params.beta,
            alpha: params.alpha,
            dilution: params.dilution,
        })
    }

    pub fn jacobian(&self) -> Mat3 {
        let JacobianInputs { a, b, h, delta: dl, g, hh, d, dp, nu, nup, rho, kappa: kap, k1, beta: be, alpha: al, dilution: dd, .. } = *self;
        [
            [a * h * hh - al * d / dl - dp * h, a * h * g, al / be],
            [
                -rho * (dl - al) * d / (a * kap * dl) - b * rho / kap - rho * h / kap * hh,
                -dd - k1 * nup * be * d * h / dl - rho * h / kap * g,
                -k1 * nu,
            ],
            [be * d + be * dp * h, be * d * h * nup / dl, -dl],
        ]
    }
}

pub fn nontrivial_jacobian(eq: &EquilibriumPoint, params: &ModelParams, kin: &KineticsSet) -> Result<Mat3, StabilityError> {
    Ok(JacobianInputs::at(eq, params, kin)?.jacobian())
}

/// Finite-difference Jacobian of the reactor right-hand side at `point = (h, S, Q)`.
///
/// Central differences where the point is at least `step` away from the
/// boundary of the nonnegative octant, second-order one-sided differences otherwise.
pub fn jacobian_fd(
    point: [f64; 3],
    params: &ModelParams,
    kin: &KineticsSet,
    step: f64,
    bvp: &BvpOptions,
) -> Result<Mat3, StabilityError> {
    // difference quotients amplify the solver tolerance, so solve to rounding level
    let bvp = BvpOptions { tol: bvp.tol.min(1e-12), method: BvpMethod::Newton, ..*bvp };
    let f = |x: [f64; 3]| -> Result<[f64; 3], StabilityError> {
        Ok(rhs_with_profile(x[0], x[1], x[2], kin, params, &bvp, None)?.value)
    };
    let mut jac = [[0.0; 3]; 3];
    for j in 0..3 {
        let shifted = |k: f64| {
            let mut x = point;
            x[j] += k * step;
            f(x)
        };
        let col = if point[j] >= step {
            let (fp, fm) = (shifted(1.0)?, shifted(-1.0)?);
            [0, 1, 2].map(|i| (fp[i] - fm[i]) / (2.0 * step))
        } else {
            let (f0, f1, f2) = (shifted(0.0)?, shifted(1.0)?, shifted(2.0)?);
            [0, 1, 2].map(|i| (-3.0 * f0[i] + 4.0 * f1[i] - f2[i]) / (2.0 * step))
        };
        for i in 0..3 {
            jac[i][j] = col[i];
        }
    }
    Ok(jac)
}

/// Routh–Hurwitz quantities of `det(lambda I - A) = lambda^3 + m1 lambda^2 + m2 lambda + m0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RouthHurwitz {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    /// `m1 m2 - m0`
    pub m3: f64,
}

impl RouthHurwitz {
    pub fn as_array(&self) -> [f64; 4] {
        [self.m0, self.m1, self.m2, self.m3]
    }

    pub fn all_positive(&self, margin: f64) -> bool {
        self.as_array().iter().all(|&m| m > margin)
    }

    /// Largest relative difference between corresponding coefficients.
    pub fn relative_difference(&self, other: &RouthHurwitz) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array().iter())
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn routh_hurwitz_matrix(m: &Mat3) -> RouthHurwitz {
    let m0 = -det3(m);
    let m1 = -(m[0][0] + m[1][1] + m[2][2]);
    let m2 = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0] + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    RouthHurwitz { m0, m1, m2, m3: m1 * m2 - m0 }
}

/// Summands of the expanded Routh–Hurwitz coefficients, each carrying its sign.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormTerms {
    pub m0: Vec<f64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub m3: Vec<f64>,
}

impl ClosedFormTerms {
    pub fn evaluate(x: &JacobianInputs) -> Self {
        let JacobianInputs {
            a,
            b,
            h,
            delta: dl,
            g,
            hh,
            d,
            dp,
            nu,
            nup,
            rho,
            kappa: kap,
            k1,
            k2,
            beta: be,
            alpha: al,
            dilution: dd,
        } = x.clone();
        let bk = be * k1;

        let m0 = vec![
            (-a * dl * hh + (dl - al) * dp) * h * dd,
            -(a * bk * kap * (al + k2) - al * rho) / (dl * kap) * h * h * nup * d * hh,
            (((rho * (dl - al) + a * bk * kap * nu) * (d + h * dp)) / kap + a * b * rho * dl / kap) * h * g,
            (rho * (dl - al) + a * bk * kap * nu) / (dl * dl * kap * a) * al * h * nup * d * d,
            k2 / dl * bk * h * h * nup * dp * d,
            nup * al * rho * b * h / (dl * kap) * d,
        ];

        let m1 = vec![
            -a * h * hh,
            al * d / dl,
            dp * h,
            dd,
            bk * nup * d * h / dl,
            rho * h / kap * g,
            dl,
        ];

        let m2 = vec![
            (-a * h * hh + al * d / dl + dp * h + dl) * dd,
            ((d + h * dp + a * b + dl) / kap) * rho * h * g,
            -(bk * h * nup * d / dl + dl) * a * h * hh,
            al * bk * h * nup * d * d / (dl * dl),
            bk * nup * h * h * d * dp / dl,
            (al + k2) * bk * nup * h * d / dl,
            (dl - al) * h * dp,
        ];

        let m3 = vec![
            (-a * h * hh + al * d / dl + dp * h + dl) * dd * dd,
            (-a * h * hh + (dl + al) * d / dl + 2.0 * h * dp + a * b + 2.0 * dl) * rho * dd * h / kap * g,
            a * a * dd * h * h * hh * hh,
            -2.0 * a * ((bk * h * nup + al) * d / dl + h * dp + dl) * h * dd * hh,
            (2.0 * bk * h * nup + al) * al * dd * d * d / (dl * dl),
            (2.0 * (bk * h * nup + al) * dp / dl + (2.0 * dl + nu) * bk * nup / dl) * h * d * dd,
            2.0 * al * d * dd,
            dd * dp * dp * h * h,
            2.0 * dd * dl * h * dp,
            dd * dl * dl,
            (d + h * dp + a * b + dl) * rho * rho * h * h / (kap * kap) * g * g,
            -((bk * h * nup / dl + 1.0) * d + h * dp + a * b + 2.0 * dl) * a * h * h * rho / kap * g * hh,
            (bk * h * (dl + al) * nup / dl + al) * h * rho * d * d / (dl * kap) * g,
            (2.0 * bk * h * nup + dl + al) * rho * h * h * dp * d / (dl * kap) * g,
            (2.0 * dl + a * b + nu) * rho * bk * h * h * nup * d / (dl * kap) * g,
            ((2.0 * al * rho - a * bk * kap * nu) * dl + al * rho * a * b) * h * d / (dl * kap) * g,
            rho * h * h * h * dp * dp / kap * g,
            ((2.0 * dl * rho - a * bk * kap * nu) + a * b * rho) * h * h * dp / kap * g,
            rho * h * dl * dl / kap * g,
            (bk * h * nup * d / dl + dl) * a * a * h * h * hh * hh,
            -(bk * h * nup + 2.0 * al) * bk * a * h * h * nup * d * d / (dl * dl) * hh,
            -(2.0 * (h * dp + dl) * a * bk * kap + al * rho) * h * h * nup * d / (dl * kap) * hh,
            -((2.0 * dl - al) * h * dp + dl * dl + al * d) * a * h * hh,
            (bk * h * nup + al) * al * bk * h * nup * d * d * d / (dl * dl * dl),
            (bk * h * nup + 2.0 * al) * bk * h * h * nup / (dl * dl) * dp * d * d,
            (dl + nu) * bk * bk * h * h * nup * nup / (dl * dl) * d * d,
            ((2.0 * a * bk * kap - rho) * dl + al * rho) * al * h * nup / (dl * dl * kap * a) * d * d,
            bk * h * h * h * nup * dp * dp / dl * d,
            (2.0 * bk * nup * h * h + (dl - al) * al * h / dl) * dp * d,
            (dl * bk * kap * (al + k2) - al * b * rho) * h * nup * d / (dl * kap),
            (dl - al) * (h * h * dp * dp + dl * h * dp),
        ];

        Self { m0, m1, m2, m3 }
    }

    pub fn sums(&self) -> RouthHurwitz {
        let s = |v: &[f64]| v.iter().sum::<f64>();
        RouthHurwitz { m0: s(&self.m0), m1: s(&self.m1), m2: s(&self.m2), m3: s(&self.m3) }
    }

    /// Smallest summand over all four expansions.
    pub fn min_term(&self) -> f64 {
        self.m0.iter().chain(&self.m1).chain(&self.m2).chain(&self.m3).cloned().fold(f64::INFINITY, f64::min)
    }
}

pub fn routh_hurwitz_closed_form(
    eq: &EquilibriumPoint,
    params: &ModelParams,
    kin: &KineticsSet,
) -> Result<(RouthHurwitz, ClosedFormTerms), StabilityError> {
    let terms = ClosedFormTerms::evaluate(&JacobianInputs::at(eq, params, kin)?);
    Ok((terms.sums(), terms))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    LocallyStable,
    Unstable,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

pub fn eigenvalues(m: &Mat3) -> Vec<Eigenvalue> {
    let mat = Matrix3::from_fn(|i, j| m[i][j]);
    let mut out: Vec<Eigenvalue> = mat.complex_eigenvalues().iter().map(|z| Eigenvalue { re: z.re, im: z.im }).collect();
    out.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    out
}

/// Verdict of the Routh–Hurwitz test, cross-checked by the spectrum.
pub fn assess_matrix(m: &Mat3) -> (RouthHurwitz, Vec<Eigenvalue>, Verdict) {
    let rh = routh_hurwitz_matrix(m);
    let eig = eigenvalues(m);
    let verdict = classify(&rh, &eig);
    (rh, eig, verdict)
}

fn classify(rh: &RouthHurwitz, eig: &[Eigenvalue]) -> Verdict {
    if rh.all_positive(VERDICT_MARGIN) {
        Verdict::LocallyStable
    } else if rh.as_array().iter().any(|&m| m < -VERDICT_MARGIN) || eig.iter().any(|e| e.re > VERDICT_MARGIN) {
        Verdict::Unstable
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub jacobian_analytic: Mat3,
    pub jacobian_fd: Mat3,
    pub g: f64,
    pub h: f64,
    pub delta: f64,
    pub m: RouthHurwitz,
    pub m_cf: RouthHurwitz,
    pub terms: ClosedFormTerms,
    pub eigenvalues: Vec<Eigenvalue>,
    pub verdict: Verdict,
    pub hh3_holds: bool,
    /// Stable by the numbers although the sufficient condition fails.
    pub hypothesis_gap: bool,
}

pub fn stability_verdict(
    eq: &EquilibriumPoint,
    params: &ModelParams,
    kin: &KineticsSet,
    bvp: &BvpOptions,
) -> Result<StabilityReport, StabilityError> {
    let inputs = JacobianInputs::at(eq, params, kin)?;
    let jacobian_analytic = inputs.jacobian();
    let jac_fd = jacobian_fd(eq.point(), params, kin, FD_STEP, bvp)?;
    let terms = ClosedFormTerms::evaluate(&inputs);
    let (m, eigenvalues, verdict) = assess_matrix(&jacobian_analytic);
    let hh3_holds = validate_assumptions(params, kin).hh3.holds;
    Ok(StabilityReport {
        jacobian_analytic,
        jacobian_fd: jac_fd,
        g: inputs.g,
        h: inputs.hh,
        delta: inputs.delta,
        m,
        m_cf: terms.sums(),
        terms,
        eigenvalues,
        verdict,
        hh3_holds,
        hypothesis_gap: verdict == Verdict::LocallyStable && !hh3_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::{find_equilibrium_shooting, washout_jacobian};

    #[test]
    fn negative_identity() {
        let rh = routh_hurwitz_matrix(&[[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]);
        assert_eq!(rh.as_array(), [1.0, 3.0, 3.0, 8.0]);
    }

    #[test]
    fn diagonal_matrix() {
        let rh = routh_hurwitz_matrix(&[[-1.0, 0.0, 0.0], [0.0, -2.0, 0.0], [0.0, 0.0, -3.0]]);
        assert_eq!(rh.as_array(), [6.0, 6.0, 11.0, 60.0]);
    }

    #[test]
    fn rotation_block_eigenvalues() {
        let (_, eig, v) = assess_matrix(&[[-1.0, -2.0, 0.0], [2.0, -1.0, 0.0], [0.0, 0.0, 0.5]]);
        assert_eq!(v, Verdict::Unstable);
        assert!((eig[0].re - 0.5).abs() < 1e-12);
        assert!((eig[1].re + 1.0).abs() < 1e-12 && (eig[1].im.abs() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_matrix_at_reference() {
        let p = ModelParams::reference(5.0);
        let k = KineticsSet::reference();
        let eq = find_equilibrium_shooting(&p, &k, &BvpOptions::default()).unwrap();
        let (m_cf, terms) = routh_hurwitz_closed_form(&eq, &p, &k).unwrap();
        let m = routh_hurwitz_matrix(&nontrivial_jacobian(&eq, &p, &k).unwrap());
        assert!(m.relative_difference(&m_cf) < 1e-10, "{m:?} vs {m_cf:?}");
        assert!(terms.min_term() >= -1e-12);
        let j = nontrivial_jacobian(&eq, &p, &k).unwrap();
        assert_eq!(j[2][2], -eq.delta);
        assert_eq!(j[0][2], p.alpha / p.beta);
    }

    #[test]
    fn washout_spectrum_via_matrix() {
        let p = ModelParams::reference(0.5);
        let k = KineticsSet::reference();
        let (_, eig, v) = assess_matrix(&washout_jacobian(&p, &k));
        assert_eq!(v, Verdict::LocallyStable);
        assert!(eig.iter().all(|e| e.re < 0.0));
    }
}
