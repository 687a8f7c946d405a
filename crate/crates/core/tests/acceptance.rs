//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints one PASS/FAIL line; the process fails if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cstr_biofilm::dynamics::{
    classify_limit, integrate, orbit_bound_monitor, IntegrateOptions, LimitClass, ReactorState, Trajectory,
};
use cstr_biofilm::equilibria::{
    find_equilibrium_reduction, find_equilibrium_shooting, washout_analysis, washout_jacobian, ScanOptions,
    ShootingContext,
};
use cstr_biofilm::kinetics::{
    DetachmentLaw, GrowthLaw, KineticsSet, ModelParams, NetGrowthLaw,
};
use cstr_biofilm::stability::{eigenvalues, stability_verdict};
use cstr_biofilm::substrate_bvp::{
    solve_profile, solve_sensitivity, BvpMethod, BvpOptions, SensitivityKind,
};

const EQ_3DP: [f64; 3] = [0.923, 2.118, 0.518];
const BASIN_ICS: [[f64; 3]; 5] = [[0.05, 0.5, 0.05], [2.0, 8.0, 2.0], [0.05, 8.0, 2.0], [2.0, 0.5, 0.05], [1.0, 3.0, 1.0]];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn max_dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
}

/// Fixture trajectories, shared by the reproduction and invariant criteria.
struct Runs {
    washout: (Result<Trajectory, String>, Duration),
    nontrivial: (Result<Trajectory, String>, Duration),
    basin: Vec<Result<Trajectory, String>>,
}

fn run(ic: [f64; 3], s_star: f64, t_end: f64) -> (Result<Trajectory, String>, Duration) {
    let params = ModelParams::reference(s_star);
    let kin = KineticsSet::reference();
    let t0 = Instant::now();
    let traj = integrate(ReactorState::new(0.0, ic[0], ic[1], ic[2]), t_end, &kin, &params, &IntegrateOptions::default())
        .map_err(|e| e.to_string());
    (traj, t0.elapsed())
}

fn criterion_1(runs: &Runs) -> Outcome {
    let (traj, elapsed) = &runs.washout;
    let traj = match traj {
        Ok(t) => t,
        Err(e) => return outcome(false, e.clone()),
    };
    let last = traj.last();
    let dist = last.distance_to([0.0, 0.5, 0.0]);
    let pass = (last.t - 50.0).abs() < 1e-12 && dist <= 1e-4 && elapsed.as_secs_f64() < 5.0;
    outcome(pass, format!("|x(50) - (0, 0.5, 0)| = {dist:.3e} (tol 1e-4), runtime {elapsed:.2?} (limit 5 s)"))
}

fn criterion_2(runs: &Runs) -> Outcome {
    let (traj, elapsed) = &runs.nontrivial;
    let traj = match traj {
        Ok(t) => t,
        Err(e) => return outcome(false, e.clone()),
    };
    let params = ModelParams::reference(5.0);
    let kin = KineticsSet::reference();
    let t0 = Instant::now();
    let red = find_equilibrium_reduction(&params, &kin, &ScanOptions::default());
    let sh = find_equilibrium_shooting(&params, &kin, &BvpOptions::default());
    let finder_time = t0.elapsed();
    let (red, sh) = match (red, sh) {
        (Ok(r), Ok(s)) if r.points.len() == 1 => (r.points.into_iter().next().unwrap(), s),
        (r, s) => return outcome(false, format!("finders: reduction {r:?}, shooting {s:?}")),
    };
    let d_traj = max_dist(traj.last().components(), EQ_3DP);
    let d_red = max_dist(red.point(), EQ_3DP);
    let d_sh = max_dist(sh.point(), EQ_3DP);
    let d_cross = red.distance(&sh);
    let total = *elapsed + finder_time;
    let pass = (traj.last().t - 100.0).abs() < 1e-12
        && d_traj <= 2e-3
        && d_red <= 2e-3
        && d_sh <= 2e-3
        && d_cross <= 1e-8
        && total.as_secs_f64() < 10.0;
    outcome(
        pass,
        format!(
            "trajectory {d_traj:.2e}, reduction {d_red:.2e}, shooting {d_sh:.2e} (tol 2e-3); finders differ by {d_cross:.2e} (tol 1e-8); runtime {total:.2?} (limit 10 s)"
        ),
    )
}

fn criterion_3(runs: &Runs) -> Outcome {
    let mut limits = Vec::new();
    for (k, traj) in runs.basin.iter().enumerate() {
        let traj = match traj {
            Ok(t) => t,
            Err(e) => return outcome(false, format!("trajectory {}: {e}", k + 1)),
        };
        match classify_limit(traj, 5.0, 30.0, 1e-3) {
            LimitClass::Nontrivial { h, s, q } => limits.push([h, s, q]),
            other => return outcome(false, format!("trajectory {} classified {other:?}", k + 1)),
        }
    }
    let spread = limits
        .iter()
        .flat_map(|a| limits.iter().map(move |b| max_dist(*a, *b)))
        .fold(0.0, f64::max);
    outcome(spread <= 1e-3, format!("5 of 5 Nontrivial, pairwise spread {spread:.2e} (tol 1e-3)"))
}

fn random_kinetics(rng: &mut ChaCha8Rng) -> KineticsSet {
    let monod = |rng: &mut ChaCha8Rng| GrowthLaw::Monod { mu: rng.gen_range(0.3..6.0), k: rng.gen_range(0.2..3.0) };
    let uptake = monod(rng);
    let planktonic = monod(rng);
    let net_growth = NetGrowthLaw::Affine { a: rng.gen_range(0.2..3.0), b: rng.gen_range(0.1..3.0) };
    let d0 = rng.gen_range(0.1..3.0);
    let detachment = if rng.gen_bool(0.5) { DetachmentLaw::Linear { d0 } } else { DetachmentLaw::Constant { d0 } };
    KineticsSet { uptake, planktonic, net_growth, detachment }
}

fn random_params(rng: &mut ChaCha8Rng) -> ModelParams {
    let mut u = || rng.gen_range(0.2..5.0);
    ModelParams {
        kappa: u(),
        dilution: u(),
        k1: u(),
        k_q: u(),
        alpha: u(),
        rho: u(),
        beta: u(),
        s_star: u() * 2.0,
    }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let params = random_params(&mut rng);
        let kin = random_kinetics(&mut rng);
        let w = washout_analysis(&params, &kin);
        let mut closed = [w.lambda0, w.lambda_plus, w.lambda_minus];
        closed.sort_by(|a, b| b.total_cmp(a));
        let numeric = eigenvalues(&washout_jacobian(&params, &kin));
        for (c, n) in closed.iter().zip(&numeric) {
            worst = worst.max((c - n.re).abs()).max(n.im.abs());
        }
    }
    let reference = washout_analysis(&ModelParams::reference(0.5), &KineticsSet::reference());
    let expected = [-1.0, -2.0 / 3.0, -7.0 / 3.0];
    let got = [reference.lambda0, reference.lambda_plus, reference.lambda_minus];
    let ref_err = (0..3).map(|i| (got[i] - expected[i]).abs()).fold(0.0, f64::max);
    outcome(
        worst <= 1e-8 && ref_err <= 1e-10,
        format!("100 random sets: max |closed - eigensolve| = {worst:.2e} (tol 1e-8); reference set error {ref_err:.2e} (tol 1e-10)"),
    )
}

fn perturb(rng: &mut ChaCha8Rng) -> (ModelParams, KineticsSet) {
    let mut f = |x: f64| x * rng.gen_range(0.8..1.2);
    let p = ModelParams::reference(5.0);
    let params = ModelParams {
        kappa: f(p.kappa),
        dilution: f(p.dilution),
        k1: f(p.k1),
        k_q: f(p.k_q),
        alpha: f(p.alpha),
        rho: f(p.rho),
        beta: f(p.beta),
        s_star: f(p.s_star),
    };
    let kin = KineticsSet {
        uptake: GrowthLaw::Monod { mu: f(4.0), k: f(1.0) },
        planktonic: GrowthLaw::Monod { mu: f(2.0), k: f(1.0) },
        net_growth: NetGrowthLaw::Affine { a: f(1.0), b: f(2.0) },
        detachment: DetachmentLaw::Linear { d0: f(1.0) },
    };
    (params, kin)
}

fn criterion_5() -> Outcome {
    let bvp = BvpOptions::default();
    let mut cases: Vec<(ModelParams, KineticsSet)> =
        [3.0, 4.0, 5.0, 8.0].iter().map(|&s| (ModelParams::reference(s), KineticsSet::reference())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut drawn = 0;
    while cases.len() < 24 && drawn < 2000 {
        drawn += 1;
        let (p, k) = perturb(&mut rng);
        if ShootingContext::new(&p, &k).is_ok() {
            cases.push((p, k));
        }
    }
    if cases.len() < 24 {
        return outcome(false, format!("only {} admissible parameter sets after {drawn} draws", cases.len()));
    }
    let mut worst_rel: f64 = 0.0;
    let mut min_term = f64::INFINITY;
    let mut hh3_cases = 0;
    let mut failures = Vec::new();
    for (i, (p, k)) in cases.iter().enumerate() {
        let eq = match find_equilibrium_shooting(p, k, &bvp) {
            Ok(e) => e,
            Err(e) => {
                failures.push(format!("case {i}: {e}"));
                continue;
            }
        };
        let r = match stability_verdict(&eq, p, k, &bvp) {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("case {i}: {e}"));
                continue;
            }
        };
        worst_rel = worst_rel.max(r.m.relative_difference(&r.m_cf));
        if r.hh3_holds {
            hh3_cases += 1;
            min_term = min_term.min(r.terms.min_term());
            if !(r.m.all_positive(0.0) && r.terms.min_term() >= -1e-12) {
                failures.push(format!("case {i}: m = {:?}, smallest term {:.3e}", r.m.as_array(), r.terms.min_term()));
            }
        }
    }
    outcome(
        failures.is_empty() && worst_rel <= 1e-8,
        format!(
            "{} equilibria: max relative difference {worst_rel:.2e} (tol 1e-8); {hh3_cases} under hh3, smallest term {min_term:.2e} (tol -1e-12){}",
            cases.len(),
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join("; ")) }
        ),
    )
}

fn criterion_6() -> Outcome {
    let bvp = BvpOptions::default();
    let kin = KineticsSet::reference();
    let mut worst: f64 = 0.0;
    for s in [3.0, 4.0, 5.0, 8.0] {
        let params = ModelParams::reference(s);
        let r = find_equilibrium_shooting(&params, &kin, &bvp)
            .map_err(|e| e.to_string())
            .and_then(|eq| stability_verdict(&eq, &params, &kin, &bvp).map_err(|e| e.to_string()));
        match r {
            Ok(r) => {
                for i in 0..3 {
                    for j in 0..3 {
                        worst = worst.max((r.jacobian_analytic[i][j] - r.jacobian_fd[i][j]).abs());
                    }
                }
            }
            Err(e) => return outcome(false, format!("S* = {s}: {e}")),
        }
    }
    outcome(worst <= 1e-5, format!("4 equilibria: max entrywise difference {worst:.2e} (tol 1e-5)"))
}

/// Fourth-order one-sided derivative at the last node.
fn end_slope(u: &[f64], dy: f64) -> f64 {
    let n = u.len() - 1;
    (25.0 * u[n] - 48.0 * u[n - 1] + 36.0 * u[n - 2] - 16.0 * u[n - 3] + 3.0 * u[n - 4]) / (12.0 * dy)
}

fn bvp_case(h: f64, s: f64) -> Result<(), String> {
    let params = ModelParams::reference(5.0);
    let kin = KineticsSet::reference();
    let opts = BvpOptions::default();
    let p = solve_profile(h, s, &kin, &params, &opts).map_err(|e| e.to_string())?;
    let u = &p.u;
    let eps = 1e-12 * (1.0 + s);
    let n = u.len() - 1;
    if !(u[0] >= -eps && u[n] <= s + eps && u.windows(2).all(|w| w[0] <= w[1] + eps)) {
        return Err("profile not monotone within [0, S]".into());
    }
    if !u.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] >= -eps) {
        return Err("profile not convex".into());
    }
    let flux_cap = h * h / params.kappa * kin.r(s);
    if !(p.flux_scaled >= -eps && p.flux_scaled <= flux_cap + eps) {
        return Err(format!("flux {} outside [0, {flux_cap}]", p.flux_scaled));
    }
    if p.residual > opts.tol {
        return Err(format!("residual {:.2e}", p.residual));
    }
    let slope = end_slope(u, p.dy());
    if (slope - p.flux_scaled).abs() > 1e-8 * (1.0 + p.flux_scaled) {
        return Err(format!("flux {} but end slope {slope}", p.flux_scaled));
    }

    let ws = solve_sensitivity(&p, SensitivityKind::DS, &kin, &params).map_err(|e| e.to_string())?;
    let w = &ws.values;
    if !(w[0] > 0.0 && w[w.len() - 1] <= 1.0 + 1e-12 && w.windows(2).all(|x| x[0] <= x[1] + 1e-12)) {
        return Err("S-sensitivity outside (0, 1] or not nondecreasing".into());
    }
    let vs = solve_sensitivity(&p, SensitivityKind::DH, &kin, &params).map_err(|e| e.to_string())?;
    if vs.values.iter().any(|&v| v > 1e-12) {
        return Err("h-sensitivity positive somewhere".into());
    }

    let picard = solve_profile(h, s, &kin, &params, &opts.with_method(BvpMethod::Picard)).map_err(|e| e.to_string())?;
    let newton = solve_profile(h, s, &kin, &params, &opts.with_method(BvpMethod::Newton)).map_err(|e| e.to_string())?;
    let gap = picard.u.iter().zip(&newton.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if gap > 1e-8 {
        return Err(format!("Picard and Newton differ by {gap:.2e}"));
    }

    let linear = KineticsSet { uptake: GrowthLaw::Linear { slope: 1.0 }, ..kin };
    let unit = ModelParams { kappa: 1.0, ..params };
    let lp = solve_profile(h, s, &linear, &unit, &opts).map_err(|e| e.to_string())?;
    let err = (0..=lp.intervals())
        .map(|i| (lp.u[i] - s * (h * lp.y(i)).cosh() / h.cosh()).abs())
        .fold(0.0, f64::max);
    if err > 1e-8 {
        return Err(format!("linear uptake differs from cosh solution by {err:.2e}"));
    }
    Ok(())
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();
    for _ in 0..200 {
        let h = rng.gen_range(0.0..3.0);
        let s = rng.gen_range(0.0..10.0);
        if let Err(e) = bvp_case(h, s) {
            failures.push(format!("(h, S) = ({h:.4}, {s:.4}): {e}"));
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "200 random (h, S): bounds, convexity, flux, sensitivity signs, Picard/Newton, cosh all hold".to_string()
        } else {
            format!("{} failures, first: {}", failures.len(), failures[0])
        },
    )
}

fn strictly_monotone(values: &[f64], increasing: bool) -> bool {
    values.windows(2).all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

fn criterion_8() -> Outcome {
    let params = ModelParams::reference(5.0);
    let kin = KineticsSet::reference();
    let body = || -> Result<(bool, String), String> {
        let ctx = ShootingContext::new(&params, &kin).map_err(|e| e.to_string())?;
        let e = |x: cstr_biofilm::equilibria::EquilibriumError| x.to_string();
        let target = params.dilution * params.s_star;
        let end_err = (ctx.s_of_h(0.0).map_err(e)? - params.s_star)
            .abs()
            .max(ctx.s_of_h(ctx.h_star).map_err(e)?.abs())
            .max((ctx.f(ctx.h_star, 0.0) - target).abs() / target)
            .max((ctx.f(0.0, params.s_star) - target).abs() / target);
        let grid = |hi: f64| (0..64).map(move |i| hi * i as f64 / 63.0);
        let s_vals: Vec<f64> = grid(ctx.h_star).map(|h| ctx.s_of_h(h)).collect::<Result<_, _>>().map_err(e)?;
        let h_vals: Vec<f64> = grid(params.s_star).map(|m| ctx.h_of_mu(m)).collect::<Result<_, _>>().map_err(e)?;
        let mu_bar = ctx.mu_underline().map_err(e)?;
        let b_vals: Vec<f64> =
            (0..64).map(|i| ctx.b(mu_bar * i as f64 / 64.0)).collect::<Result<_, _>>().map_err(e)?;
        let eq = ctx.find(&BvpOptions::default()).map_err(e)?;
        let mu_star = eq.mu.ok_or("shooting point carries no mu")?;
        let b0 = b_vals[0];
        let pass = end_err <= 1e-10
            && strictly_monotone(&s_vals, false)
            && strictly_monotone(&h_vals, false)
            && strictly_monotone(&b_vals, true)
            && (b0 + 5.0).abs() <= 1e-3
            && (ctx.h_star - 1.6225).abs() <= 1e-3
            && mu_star <= mu_bar;
        Ok((
            pass,
            format!(
                "endpoint error {end_err:.1e}; S(h), h(mu) decreasing: {}, {}; B increasing: {}; B(0) = {b0:.6}; h_* = {:.6}; mu* = {mu_star:.6} <= mu_underline = {mu_bar:.6}",
                strictly_monotone(&s_vals, false),
                strictly_monotone(&h_vals, false),
                strictly_monotone(&b_vals, true),
                ctx.h_star
            ),
        ))
    };
    match body() {
        Ok((pass, detail)) => outcome(pass, detail),
        Err(e) => outcome(false, e),
    }
}

fn criterion_9(runs: &Runs) -> Outcome {
    let kin = KineticsSet::reference();
    let fixtures = std::iter::once((0.5, &runs.washout.0))
        .chain(std::iter::once((5.0, &runs.nontrivial.0)))
        .chain(runs.basin.iter().map(|t| (5.0, t)));
    let mut min_pre: f64 = f64::INFINITY;
    let mut failures = Vec::new();
    let mut count = 0;
    for (k, (s_star, traj)) in fixtures.enumerate() {
        count += 1;
        let traj = match traj {
            Ok(t) => t,
            Err(e) => {
                failures.push(format!("fixture {k}: {e}"));
                continue;
            }
        };
        min_pre = min_pre.min(traj.monitor.min_component_pre_clamp);
        if !traj.nonnegative() {
            failures.push(format!("fixture {k}: component {:.2e}", traj.monitor.min_component_pre_clamp));
        }
        if !traj.monitor.s_bound_violations.is_empty() {
            failures.push(format!("fixture {k}: {} S-bound violations", traj.monitor.s_bound_violations.len()));
        }
        match orbit_bound_monitor(traj, &kin, &ModelParams::reference(s_star)) {
            Ok(b) if b.holds => {}
            Ok(b) => failures.push(format!("fixture {k}: functional reached {} > {}", b.max_value, b.bound)),
            Err(e) => failures.push(format!("fixture {k}: {e}")),
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{count} trajectories: min pre-clamp component {min_pre:.2e} (tol -1e-9){}",
            if failures.is_empty() { "; S-bound and boundedness functional hold".to_string() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

fn main() {
    let runs = Runs {
        washout: run([0.5, 0.3, 0.3], 0.5, 50.0),
        nontrivial: run([0.1, 5.0, 0.1], 5.0, 100.0),
        basin: BASIN_ICS.iter().map(|&ic| run(ic, 5.0, 150.0).0).collect(),
    };
    let criteria: [(&str, Box<dyn Fn() -> Outcome>); 9] = [
        ("washout run", Box::new(|| criterion_1(&runs))),
        ("nontrivial run and both finders", Box::new(|| criterion_2(&runs))),
        ("five trajectories share one limit", Box::new(|| criterion_3(&runs))),
        ("washout spectrum", Box::new(criterion_4)),
        ("Routh-Hurwitz closed form", Box::new(criterion_5)),
        ("Jacobian oracle", Box::new(criterion_6)),
        ("substrate BVP properties", Box::new(criterion_7)),
        ("shooting machinery", Box::new(criterion_8)),
        ("dynamics invariants", Box::new(|| criterion_9(&runs))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("{} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
