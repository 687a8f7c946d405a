//! Steady states of the reactor.
//!
//! The washout state `(0, S*, 0)` is analysed in closed form. Nontrivial
//! equilibria are located by two independent routes: a reduction to a scalar
//! equation in the thickness `h` built on the substrate BVP, and (for affine
//! net growth) a shooting construction parametrised by the substratum
//! concentration `mu`.

mod reduction;
mod shooting;
mod washout;

pub use reduction::{find_equilibrium_reduction, reduced_growth, s_of_h_general, ReductionResult, ScanOptions};
pub use shooting::{
    b_function, f_closed_form, find_equilibrium_shooting, h_of_mu, h_star_cap, m_function, mu_underline,
    s_of_h_shooting, shoot_at, shoot_profile, ShootingContext, ShootingProfile, MU_GRID, SHOOT_ATOL, SHOOT_RTOL,
};
pub use washout::{washout_analysis, washout_jacobian, GlobalVerdict, LocalVerdict, WashoutReport};

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::rhs_with_profile;
use crate::kinetics::{KineticsSet, ModelParams};
use crate::substrate_bvp::{BvpError, BvpOptions, SubstrateProfile};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    /// The requested construction does not apply to these kinetics.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// Hypotheses under which an equilibrium is guaranteed do not hold.
    #[error("existence conditions fail: {0}")]
    ConditionsFail(String),
    #[error("no equilibrium found: {0}")]
    NotFound(String),
    /// A property the theory guarantees was not observed numerically.
    #[error("model violation: {0}")]
    ModelViolation(String),
    #[error("substrate profile: {0}")]
    Bvp(#[from] BvpError),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    Reduction,
    Shooting,
}

/// Residuals of the steady-state conditions at a computed equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    /// Right-hand side of the thickness, substrate and suspended-biomass equations.
    pub rhs: [f64; 3],
    /// `Q - beta d(h) h / Delta`.
    pub q_relation: f64,
    /// `int g(r(u)) dy - (k2 - nu(S)) d(h) / Delta`.
    pub growth_balance: f64,
}

impl Residuals {
    pub fn max_abs(&self) -> f64 {
        self.rhs
            .iter()
            .chain([self.q_relation, self.growth_balance].iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumPoint {
    pub h: f64,
    pub s: f64,
    pub q: f64,
    /// Substrate profile inside the biofilm at `(h, S)`.
    pub profile: SubstrateProfile,
    /// `alpha + k2 - nu(S)`.
    pub delta: f64,
    pub method: Method,
    /// Substratum concentration from the shooting construction.
    pub mu: Option<f64>,
    pub residuals: Residuals,
}

impl EquilibriumPoint {
    /// Completes `(h, S)` to an equilibrium report with `Q` eliminated.
    pub fn assemble(
        h: f64,
        s: f64,
        method: Method,
        mu: Option<f64>,
        kin: &KineticsSet,
        params: &ModelParams,
        bvp: &BvpOptions,
    ) -> Result<Self, EquilibriumError> {
        let delta = params.alpha + params.k2() - kin.nu(s);
        let q = q_of(h, s, kin, params);
        let eval = rhs_with_profile(h, s, q, kin, params, bvp, None)?;
        let profile = eval.profile;
        let growth = profile.integrate(|u| kin.g(kin.r(u)));
        let residuals = Residuals {
            rhs: eval.value,
            q_relation: q - params.beta * kin.d(h) * h / delta,
            growth_balance: growth - (params.k2() - kin.nu(s)) * kin.d(h) / delta,
        };
        Ok(Self { h, s, q, profile, delta, method, mu, residuals })
    }

    pub fn point(&self) -> [f64; 3] {
        [self.h, self.s, self.q]
    }

    /// Max-norm distance between two equilibria.
    pub fn distance(&self, other: &EquilibriumPoint) -> f64 {
        self.point().iter().zip(other.point().iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Suspended biomass at a steady state with thickness `h` and substrate `S`.
pub fn q_of(h: f64, s: f64, kin: &KineticsSet, params: &ModelParams) -> f64 {
    params.beta * kin.d(h) * h / (params.alpha + params.k2() - kin.nu(s))
}
