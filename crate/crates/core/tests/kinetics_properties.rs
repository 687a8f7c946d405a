use cstr_biofilm::kinetics::{
    h3b_grid, validate_assumptions, DetachmentLaw, GrowthLaw, KineticsSet, ModelParams, NetGrowthLaw,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn growth_law() -> impl Strategy<Value = GrowthLaw> {
    prop_oneof![
        (0.1f64..8.0, 0.2f64..5.0).prop_map(|(mu, k)| GrowthLaw::Monod { mu, k }),
        (0.1f64..5.0).prop_map(|slope| GrowthLaw::Linear { slope }),
    ]
}

fn kinetics() -> impl Strategy<Value = KineticsSet> {
    let net = prop_oneof![
        (0.1f64..3.0, 0.0f64..3.0).prop_map(|(a, b)| NetGrowthLaw::Affine { a, b }),
        (0.5f64..5.0, 0.2f64..3.0, 0.0f64..2.0).prop_map(|(g_max, k, b)| NetGrowthLaw::Saturating { g_max, k, b }),
    ];
    let det = prop_oneof![
        (0.1f64..3.0).prop_map(|d0| DetachmentLaw::Linear { d0 }),
        (0.1f64..3.0).prop_map(|d0| DetachmentLaw::Constant { d0 }),
    ];
    (growth_law(), growth_law(), net, det).prop_map(|(uptake, planktonic, net_growth, detachment)| KineticsSet {
        uptake,
        planktonic,
        net_growth,
        detachment,
    })
}

/// Central difference with step 1e-6 against the analytic derivative, relative 1e-6.
fn derivative_matches(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, x: f64) -> bool {
    let step = 1e-6;
    let fd = (f(x + step) - f(x - step)) / (2.0 * step);
    let exact = df(x);
    (fd - exact).abs() <= 1e-6 * exact.abs().max(1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn growth_laws_are_admissible(kin in kinetics(), s_star in 0.1f64..10.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (x, y) = (2.0 * s_star * a.min(b), 2.0 * s_star * a.max(b));
        prop_assert_eq!(kin.r(0.0), 0.0);
        prop_assert_eq!(kin.nu(0.0), 0.0);
        prop_assert!(kin.r(x) <= kin.r(y));
        prop_assert!(kin.nu(x) <= kin.nu(y));
        if y > 0.0 {
            prop_assert!(y * kin.r(y) > 0.0);
            prop_assert!(kin.nu(y) > 0.0 && kin.d(y) > 0.0);
        }
        prop_assert!(kin.eval_r(-y - 1e-9).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences(kin in kinetics(), s_star in 0.1f64..10.0, a in 0.0f64..1.0) {
        let x = (2.0 * s_star * a).max(1e-5);
        prop_assert!(derivative_matches(|s| kin.r(s), |s| kin.dr(s), x));
        prop_assert!(derivative_matches(|s| kin.nu(s), |s| kin.dnu(s), x));
        prop_assert!(derivative_matches(|s| kin.g(s), |s| kin.dg(s), x));
        prop_assert!(derivative_matches(|h| kin.d(h), |h| kin.dd(h), x));
    }
}

#[test]
fn analytic_and_grid_h3b_agree_for_monod() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut tested = 0;
    let mut holding = 0;
    while tested < 100 {
        let params = ModelParams {
            kappa: 1.0,
            dilution: rng.gen_range(0.2..3.0),
            k1: 1.0,
            k_q: rng.gen_range(0.2..3.0),
            alpha: rng.gen_range(0.2..3.0),
            rho: 1.0,
            beta: 1.0,
            s_star: rng.gen_range(0.2..10.0),
        };
        let mu = rng.gen_range(0.5..8.0);
        let kin = KineticsSet { planktonic: GrowthLaw::Monod { mu, k: rng.gen_range(0.2..4.0) }, ..KineticsSet::reference() };
        if params.alpha + params.k2() == mu {
            continue;
        }
        tested += 1;
        let report = validate_assumptions(&params, &kin);
        let analytic = report.h3b_analytic.as_ref().expect("Monod growth has a closed-form check").holds;
        assert_eq!(analytic, h3b_grid(&params, &kin), "{params:?} mu_nu = {mu}");
        assert_eq!(report.h3b.holds, analytic);
        holding += analytic as usize;
    }
    // both outcomes are exercised
    assert!(holding > 10 && holding < 90, "{holding}");
}

#[test]
fn reference_washout_regime_conditions() {
    let r = validate_assumptions(&ModelParams::reference(0.5), &KineticsSet::reference());
    assert!(r.s1.holds && r.s2.holds);
    assert!(!r.n2.holds);
}

#[test]
fn reference_nontrivial_regime_conditions() {
    let r = validate_assumptions(&ModelParams::reference(5.0), &KineticsSet::reference());
    assert!(r.hh3.holds && r.uniqueness() && r.existence());
}
