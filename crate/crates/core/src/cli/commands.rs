use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};

use super::output::{fmt_g, suffixed, sweep_csv, trajectory_csv, write_atomic, SweepRow};
use super::{parse_config, svg, CliError, Command, MethodArg, ScenarioConfig};
use crate::dynamics::{classify_limit, integrate, DynamicsError, LimitClass, ReactorState, Trajectory};
use crate::equilibria::{
    find_equilibrium_reduction, find_equilibrium_shooting, washout_analysis, EquilibriumError, EquilibriumPoint,
    LocalVerdict, ScanOptions,
};
use crate::kinetics::validate_assumptions;
use crate::stability::{stability_verdict, StabilityError};

/// Fraction of the simulated span inspected by the limit classifier.
const CLASSIFY_WINDOW: f64 = 0.2;
const CLASSIFY_TOL: f64 = 1e-3;

pub(super) fn dispatch(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::Validate { config } => validate(&load(&config)?),
        Command::Simulate { config, out, svg, ic, t_end } => simulate(&load(&config)?, &out, svg.as_deref(), &ic, t_end),
        Command::Washout { config } => washout(&load(&config)?),
        Command::Equilibrium { config, method } => equilibrium(&load(&config)?, method),
        Command::Stability { config } => stability(&load(&config)?),
        Command::Sweep { config, param, from, to, steps, out } => sweep(&load(&config)?, &param, from, to, steps, &out),
    }
}

fn load(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|source| CliError::Config { path: path.display().to_string(), source })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    write_atomic(path, contents.as_bytes()).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn print_json(v: &Value) {
    // a closed pipe (`| head`) is not worth a panic
    let _ = writeln!(io::stdout().lock(), "{}", serde_json::to_string_pretty(v).expect("JSON values serialize"));
}

fn equilibrium_error(e: EquilibriumError) -> CliError {
    match e {
        EquilibriumError::Unsupported(m) => CliError::Precondition(m),
        EquilibriumError::ConditionsFail(m) | EquilibriumError::NotFound(m) => CliError::NoEquilibrium(m),
        other => CliError::Solver(other.to_string()),
    }
}

fn validate(cfg: &ScenarioConfig) -> Result<i32, CliError> {
    let report = validate_assumptions(&cfg.params, &cfg.kin);
    println!("k2 = {}", fmt_g(cfg.params.k2()));
    for c in report.checks() {
        let values: Vec<String> = c.values.iter().map(|(k, v)| format!("{k}={}", fmt_g(*v))).collect();
        let mut line = format!("{:<16} {:<5}", c.name, c.holds);
        if !values.is_empty() {
            line.push_str("  ");
            line.push_str(&values.join(" "));
        }
        if let Some(n) = &c.note {
            line.push_str(&format!("  ({n})"));
        }
        println!("{}", line.trim_end());
    }
    Ok(0)
}

fn describe(class: &LimitClass) -> String {
    match class {
        LimitClass::Washout => "Washout".into(),
        LimitClass::Nontrivial { h, s, q } => format!("Nontrivial h={} S={} Q={}", fmt_g(*h), fmt_g(*s), fmt_g(*q)),
        LimitClass::Undecided => "Undecided".into(),
    }
}

/// Equilibrium drawn as dashed guides: the nontrivial one if it exists, else a stable washout.
fn guide_point(cfg: &ScenarioConfig) -> Option<[f64; 3]> {
    let scan = ScanOptions { bvp: cfg.bvp_options(), ..Default::default() };
    if let Ok(r) = find_equilibrium_reduction(&cfg.params, &cfg.kin, &scan) {
        if let Some(p) = r.points.first() {
            return Some(p.point());
        }
    }
    let w = washout_analysis(&cfg.params, &cfg.kin);
    (w.local_verdict == LocalVerdict::Stable).then_some([0.0, cfg.params.s_star, 0.0])
}

fn simulate(
    cfg: &ScenarioConfig,
    out: &Path,
    svg_path: Option<&Path>,
    ics: &[[f64; 3]],
    t_end: Option<f64>,
) -> Result<i32, CliError> {
    let ics: Vec<[f64; 3]> = if !ics.is_empty() {
        ics.to_vec()
    } else if let Some(ic) = cfg.initial {
        vec![[ic.h0, ic.s0, ic.q0]]
    } else {
        return Err(CliError::Usage("no initial state: set h0, S0 and Q0 in the config or pass --ic".into()));
    };
    let t_end = t_end.unwrap_or(cfg.solver.t_end);
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(CliError::Usage(format!("t_end must be nonnegative, got {t_end}")));
    }
    let opts = cfg.integrate_options();
    let results: Vec<Result<Trajectory, DynamicsError>> = ics
        .par_iter()
        .map(|ic| integrate(ReactorState::new(0.0, ic[0], ic[1], ic[2]), t_end, &cfg.kin, &cfg.params, &opts))
        .collect();

    let multi = ics.len() > 1;
    let mut failure = None;
    let mut finished = Vec::new();
    for (k, (ic, res)) in ics.iter().zip(results).enumerate() {
        let path = if multi { suffixed(out, k + 1) } else { out.to_path_buf() };
        let label = format!("trajectory {} (h0={}, S0={}, Q0={})", k + 1, fmt_g(ic[0]), fmt_g(ic[1]), fmt_g(ic[2]));
        match res {
            Ok(traj) => {
                write(&path, &trajectory_csv(&traj))?;
                let class = classify_limit(&traj, cfg.params.s_star, CLASSIFY_WINDOW * t_end, CLASSIFY_TOL);
                let last = traj.last();
                println!(
                    "{label}: {}; final t={} h={} S={} Q={} -> {}",
                    describe(&class),
                    fmt_g(last.t),
                    fmt_g(last.h),
                    fmt_g(last.s),
                    fmt_g(last.q),
                    path.display()
                );
                finished.push(traj);
            }
            Err(DynamicsError::IntegrationFailure { t, reason, partial }) => {
                write(&path, &trajectory_csv(&partial))?;
                println!("{label}: integration failed at t={}: {reason} (partial output in {})", fmt_g(t), path.display());
                failure.get_or_insert(CliError::Solver(format!("trajectory {} failed at t={t}: {reason}", k + 1)));
                finished.push(*partial);
            }
            Err(DynamicsError::InvalidInitialState { .. }) | Err(DynamicsError::InvalidOptions(_)) => {
                return Err(CliError::Usage(res_err_text(ic)));
            }
            Err(e @ DynamicsError::Bvp(_)) => {
                failure.get_or_insert(CliError::Solver(format!("trajectory {}: {e}", k + 1)));
            }
        }
    }
    if let Some(svg_path) = svg_path {
        write(svg_path, &svg::render(&finished, guide_point(cfg)))?;
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(0),
    }
}

fn res_err_text(ic: &[f64; 3]) -> String {
    format!("invalid initial state ({}, {}, {})", ic[0], ic[1], ic[2])
}

fn washout(cfg: &ScenarioConfig) -> Result<i32, CliError> {
    let report = washout_analysis(&cfg.params, &cfg.kin);
    print_json(&serde_json::to_value(report).expect("report serializes"));
    Ok(0)
}

fn point_json(p: &EquilibriumPoint) -> Value {
    json!({
        "h_star": p.h,
        "S_star": p.s,
        "Q_star": p.q,
        "Delta": p.delta,
        "mu_star": p.mu,
        "u0": p.profile.center(),
        "residuals": {
            "dh": p.residuals.rhs[0],
            "dS": p.residuals.rhs[1],
            "dQ": p.residuals.rhs[2],
            "Q_relation": p.residuals.q_relation,
            "growth_balance": p.residuals.growth_balance,
        },
    })
}

fn code_of(e: &EquilibriumError) -> i32 {
    equilibrium_error(e.clone()).exit_code()
}

fn equilibrium(cfg: &ScenarioConfig, method: MethodArg) -> Result<i32, CliError> {
    let bvp = cfg.bvp_options();
    let mut report = serde_json::Map::new();
    let mut codes = Vec::new();
    let mut reduction_points = Vec::new();
    let mut shooting_point = None;

    if matches!(method, MethodArg::Reduction | MethodArg::Both) {
        let scan = ScanOptions { bvp, ..Default::default() };
        let v = match find_equilibrium_reduction(&cfg.params, &cfg.kin, &scan) {
            Ok(r) => {
                codes.push(if r.points.is_empty() { 4 } else { 0 });
                let v = json!({
                    "found": !r.points.is_empty(),
                    "points": r.points.iter().map(point_json).collect::<Vec<_>>(),
                    "diagnostic": r.diagnostic,
                });
                reduction_points = r.points;
                v
            }
            Err(e) => {
                codes.push(code_of(&e));
                json!({ "found": false, "error": e.to_string() })
            }
        };
        report.insert("reduction".into(), v);
    }
    if matches!(method, MethodArg::Shooting | MethodArg::Both) {
        let v = match find_equilibrium_shooting(&cfg.params, &cfg.kin, &bvp) {
            Ok(p) => {
                codes.push(0);
                let mut v = point_json(&p);
                v["found"] = json!(true);
                shooting_point = Some(p);
                v
            }
            Err(e) => {
                codes.push(code_of(&e));
                json!({ "found": false, "error": e.to_string() })
            }
        };
        report.insert("shooting".into(), v);
    }
    if method == MethodArg::Both {
        let discrepancy = shooting_point
            .as_ref()
            .and_then(|s| reduction_points.iter().map(|r| r.distance(s)).reduce(f64::min));
        report.insert("discrepancy".into(), json!(discrepancy));
    }
    print_json(&Value::Object(report));

    let code = if codes.contains(&3) {
        3
    } else if codes.contains(&0) {
        0
    } else if codes.contains(&4) {
        4
    } else {
        2
    };
    if code != 0 {
        eprintln!("error: no equilibrium found (exit {code})");
    }
    Ok(code)
}

fn stability(cfg: &ScenarioConfig) -> Result<i32, CliError> {
    if cfg.kin.net_growth.affine().is_none() {
        return Err(CliError::Precondition("stability analysis needs affine net growth".into()));
    }
    let bvp = cfg.bvp_options();
    let scan = ScanOptions { bvp, ..Default::default() };
    let found = find_equilibrium_reduction(&cfg.params, &cfg.kin, &scan).map_err(equilibrium_error)?;
    let eq = found
        .points
        .first()
        .ok_or_else(|| CliError::NoEquilibrium(found.diagnostic.clone().unwrap_or_default()))?;
    let r = stability_verdict(eq, &cfg.params, &cfg.kin, &bvp).map_err(|e| match e {
        StabilityError::Unsupported(m) => CliError::Precondition(m),
        other => CliError::Solver(other.to_string()),
    })?;
    let v = json!({
        "equilibrium": point_json(eq),
        "jacobian_analytic": r.jacobian_analytic,
        "jacobian_fd": r.jacobian_fd,
        "G": r.g,
        "H": r.h,
        "Delta": r.delta,
        "m0": r.m.m0, "m1": r.m.m1, "m2": r.m.m2, "m3": r.m.m3,
        "m0_cf": r.m_cf.m0, "m1_cf": r.m_cf.m1, "m2_cf": r.m_cf.m2, "m3_cf": r.m_cf.m3,
        "terms": r.terms,
        "eigenvalues": r.eigenvalues,
        "verdict": r.verdict,
        "hh3_holds": r.hh3_holds,
        "hypothesis_gap": r.hypothesis_gap,
    });
    print_json(&v);
    Ok(0)
}

fn sweep_point(cfg: &ScenarioConfig, sstar: f64) -> SweepRow {
    let params = cfg.params.with_s_star(sstar);
    let lambda_plus_washout = washout_analysis(&params, &cfg.kin).lambda_plus;
    let bvp = cfg.bvp_options();
    let scan = ScanOptions { bvp, ..Default::default() };
    let eq = find_equilibrium_reduction(&params, &cfg.kin, &scan).ok().and_then(|r| r.points.into_iter().next());
    let verdict = match &eq {
        Some(p) if cfg.kin.net_growth.affine().is_some() => match stability_verdict(p, &params, &cfg.kin, &bvp) {
            Ok(r) => format!("{:?}", r.verdict),
            Err(_) => "NA".into(),
        },
        _ => "NA".into(),
    };
    SweepRow { sstar, point: eq.map(|p| p.point()), lambda_plus_washout, verdict }
}

fn sweep(cfg: &ScenarioConfig, param: &str, from: f64, to: f64, steps: usize, out: &Path) -> Result<i32, CliError> {
    if param != "sstar" {
        return Err(CliError::Usage(format!("only `sstar` can be swept, got `{param}`")));
    }
    if !(from > 0.0 && from < to && to.is_finite()) {
        return Err(CliError::Usage(format!("need 0 < from < to, got from={from}, to={to}")));
    }
    if steps < 2 {
        return Err(CliError::Usage(format!("need at least 2 steps, got {steps}")));
    }
    let grid: Vec<f64> = (0..steps)
        .map(|i| if i + 1 == steps { to } else { from + (to - from) * i as f64 / (steps - 1) as f64 })
        .collect();
    let rows: Vec<SweepRow> = grid.par_iter().map(|&s| sweep_point(cfg, s)).collect();
    write(out, &sweep_csv(&rows))?;
    let found = rows.iter().filter(|r| r.point.is_some()).count();
    println!("{} of {} points have a nontrivial equilibrium -> {}", found, rows.len(), out.display());
    Ok(0)
}
