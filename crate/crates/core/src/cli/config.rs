//! Scenario files: flat `key = value` lines with `#` comments.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::dynamics::IntegrateOptions;
use crate::kinetics::{DetachmentLaw, GrowthLaw, KineticsSet, ModelParams, NetGrowthLaw};
use crate::substrate_bvp::BvpOptions;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    At { line: usize, column: usize, message: String },
    #[error("missing required key `{0}`")]
    Missing(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialState {
    pub h0: f64,
    pub s0: f64,
    pub q0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub bvp_n: usize,
    pub bvp_tol: f64,
    pub ode_rtol: f64,
    pub t_end: f64,
    pub sample_dt: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { bvp_n: 512, bvp_tol: 1e-10, ode_rtol: 1e-8, t_end: 100.0, sample_dt: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub params: ModelParams,
    pub kin: KineticsSet,
    pub initial: Option<InitialState>,
    pub solver: SolverConfig,
}

impl ScenarioConfig {
    pub fn bvp_options(&self) -> BvpOptions {
        BvpOptions { n: self.solver.bvp_n, tol: self.solver.bvp_tol, ..Default::default() }
    }

    pub fn integrate_options(&self) -> IntegrateOptions {
        IntegrateOptions {
            rtol: self.solver.ode_rtol,
            atol: self.solver.ode_rtol * 1e-2,
            sample_dt: self.solver.sample_dt,
            bvp: self.bvp_options(),
            ..Default::default()
        }
    }
}

struct Entry {
    value: String,
    line: usize,
    column: usize,
    used: bool,
}

struct Entries {
    map: HashMap<String, Entry>,
}

impl Entries {
    fn at(e: &Entry, message: impl Into<String>) -> ConfigError {
        ConfigError::At { line: e.line, column: e.column, message: message.into() }
    }

    fn raw(&mut self, key: &str) -> Option<&mut Entry> {
        let e = self.map.get_mut(key)?;
        e.used = true;
        Some(e)
    }

    fn opt_f64(&mut self, key: &str, check: fn(f64) -> bool, what: &str) -> Result<Option<f64>, ConfigError> {
        let Some(e) = self.raw(key) else { return Ok(None) };
        let v: f64 = e
            .value
            .parse()
            .map_err(|_| Self::at(e, format!("`{key}`: expected a number, found `{}`", e.value)))?;
        if !v.is_finite() || !check(v) {
            return Err(Self::at(e, format!("`{key}` must be {what}, got {v}")));
        }
        Ok(Some(v))
    }

    fn positive(&mut self, key: &str) -> Result<f64, ConfigError> {
        self.opt_f64(key, |v| v > 0.0, "positive")?.ok_or_else(|| ConfigError::Missing(key.into()))
    }

    fn kind(&mut self, key: &str, allowed: &[&str]) -> Result<String, ConfigError> {
        let e = self.raw(key).ok_or_else(|| ConfigError::Missing(key.into()))?;
        if !allowed.contains(&e.value.as_str()) {
            return Err(Self::at(e, format!("`{key}` must be one of {}, got `{}`", allowed.join("|"), e.value)));
        }
        Ok(e.value.clone())
    }
}

const KNOWN_KEYS: &[&str] = &[
    "kappa", "D", "k1", "kQ", "alpha", "rho", "beta", "sstar", "r_kind", "r_mu", "r_K", "r_slope", "nu_kind",
    "nu_mu", "nu_K", "nu_slope", "g_kind", "g_a", "g_b", "g_max", "g_K", "d_kind", "d_d0", "h0", "S0", "Q0",
    "bvp_n", "bvp_tol", "ode_rtol", "t_end", "sample_dt",
];

fn growth_law(e: &mut Entries, prefix: &str) -> Result<GrowthLaw, ConfigError> {
    let kind = e.kind(&format!("{prefix}_kind"), &["monod", "linear"])?;
    Ok(match kind.as_str() {
        "monod" => GrowthLaw::Monod { mu: e.positive(&format!("{prefix}_mu"))?, k: e.positive(&format!("{prefix}_K"))? },
        _ => GrowthLaw::Linear { slope: e.positive(&format!("{prefix}_slope"))? },
    })
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut map: HashMap<String, Entry> = HashMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let key_col = content.len() - content.trim_start().len() + 1;
        let Some(eq) = content.find('=') else {
            return Err(ConfigError::At { line, column: key_col, message: "expected `key = value`".into() });
        };
        let key = content[..eq].trim();
        let after = &content[eq + 1..];
        let value = after.trim();
        let value_col = eq + 2 + (after.len() - after.trim_start().len());
        if key.is_empty() {
            return Err(ConfigError::At { line, column: key_col, message: "empty key".into() });
        }
        if key == "k2" {
            return Err(ConfigError::At {
                line,
                column: key_col,
                message: "`k2` is derived as D + kQ and cannot be set".into(),
            });
        }
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::At { line, column: key_col, message: format!("unknown key `{key}`") });
        }
        if value.is_empty() {
            return Err(ConfigError::At { line, column: value_col, message: format!("`{key}` has no value") });
        }
        if let Some(prev) = map.get(key) {
            return Err(ConfigError::At {
                line,
                column: key_col,
                message: format!("duplicate key `{key}` (first set on line {})", prev.line),
            });
        }
        map.insert(key.to_string(), Entry { value: value.to_string(), line, column: value_col, used: false });
    }
    let mut e = Entries { map };

    let params = ModelParams {
        kappa: e.positive("kappa")?,
        dilution: e.positive("D")?,
        k1: e.positive("k1")?,
        k_q: e.positive("kQ")?,
        alpha: e.positive("alpha")?,
        rho: e.positive("rho")?,
        beta: e.positive("beta")?,
        s_star: e.positive("sstar")?,
    };
    let uptake = growth_law(&mut e, "r")?;
    let planktonic = growth_law(&mut e, "nu")?;
    let net_growth = match e.kind("g_kind", &["affine", "saturating"])?.as_str() {
        "affine" => NetGrowthLaw::Affine { a: e.positive("g_a")?, b: e.positive("g_b")? },
        _ => NetGrowthLaw::Saturating { g_max: e.positive("g_max")?, k: e.positive("g_K")?, b: e.positive("g_b")? },
    };
    let detachment = match e.kind("d_kind", &["linear", "constant"])?.as_str() {
        "linear" => DetachmentLaw::Linear { d0: e.positive("d_d0")? },
        _ => DetachmentLaw::Constant { d0: e.positive("d_d0")? },
    };
    let kin = KineticsSet { uptake, planktonic, net_growth, detachment };

    let nonneg = |v: f64| v >= 0.0;
    let ic = [
        e.opt_f64("h0", nonneg, "nonnegative")?,
        e.opt_f64("S0", nonneg, "nonnegative")?,
        e.opt_f64("Q0", nonneg, "nonnegative")?,
    ];
    let initial = match ic {
        [Some(h0), Some(s0), Some(q0)] => Some(InitialState { h0, s0, q0 }),
        [None, None, None] => None,
        _ => {
            let missing = ["h0", "S0", "Q0"].iter().zip(ic.iter()).find(|(_, v)| v.is_none()).unwrap().0;
            return Err(ConfigError::Missing(format!("{missing} (h0, S0 and Q0 go together)")));
        }
    };

    let defaults = SolverConfig::default();
    let bvp_n = match e.raw("bvp_n") {
        None => defaults.bvp_n,
        Some(entry) => match entry.value.parse::<usize>() {
            Ok(n) if n >= 4 && n % 2 == 0 => n,
            _ => return Err(Entries::at(entry, format!("`bvp_n` must be an even integer >= 4, got `{}`", entry.value))),
        },
    };
    let solver = SolverConfig {
        bvp_n,
        bvp_tol: e.opt_f64("bvp_tol", |v| v > 0.0, "positive")?.unwrap_or(defaults.bvp_tol),
        ode_rtol: e.opt_f64("ode_rtol", |v| v > 0.0, "positive")?.unwrap_or(defaults.ode_rtol),
        t_end: e.opt_f64("t_end", nonneg, "nonnegative")?.unwrap_or(defaults.t_end),
        sample_dt: e.opt_f64("sample_dt", |v| v > 0.0, "positive")?.unwrap_or(defaults.sample_dt),
    };

    // keys that belong to a family other than the selected one
    let mut stray: Vec<&Entry> = e.map.values().filter(|v| !v.used).collect();
    stray.sort_by_key(|v| v.line);
    if let Some(s) = stray.first() {
        let key = e.map.iter().find(|(_, v)| std::ptr::eq(*v, *s)).map(|(k, _)| k.clone()).unwrap();
        return Err(ConfigError::At {
            line: s.line,
            column: 1,
            message: format!("key `{key}` does not apply to the selected kinetics family"),
        });
    }

    Ok(ScenarioConfig { params, kin, initial, solver })
}

fn growth_lines(out: &mut String, prefix: &str, law: &GrowthLaw) {
    match law {
        GrowthLaw::Monod { mu, k } => {
            let _ = writeln!(out, "{prefix}_kind = monod\n{prefix}_mu = {mu:?}\n{prefix}_K = {k:?}");
        }
        GrowthLaw::Linear { slope } => {
            let _ = writeln!(out, "{prefix}_kind = linear\n{prefix}_slope = {slope:?}");
        }
    }
}

/// Canonical text form; `parse_config(&serialize_config(c)) == c`.
pub fn serialize_config(c: &ScenarioConfig) -> String {
    let p = &c.params;
    let mut out = String::new();
    let _ = writeln!(out, "# reactor");
    for (k, v) in [
        ("kappa", p.kappa),
        ("D", p.dilution),
        ("k1", p.k1),
        ("kQ", p.k_q),
        ("alpha", p.alpha),
        ("rho", p.rho),
        ("beta", p.beta),
        ("sstar", p.s_star),
    ] {
        let _ = writeln!(out, "{k} = {v:?}");
    }
    let _ = writeln!(out, "# kinetics");
    growth_lines(&mut out, "r", &c.kin.uptake);
    growth_lines(&mut out, "nu", &c.kin.planktonic);
    match c.kin.net_growth {
        NetGrowthLaw::Affine { a, b } => {
            let _ = writeln!(out, "g_kind = affine\ng_a = {a:?}\ng_b = {b:?}");
        }
        NetGrowthLaw::Saturating { g_max, k, b } => {
            let _ = writeln!(out, "g_kind = saturating\ng_max = {g_max:?}\ng_K = {k:?}\ng_b = {b:?}");
        }
    }
    match c.kin.detachment {
        DetachmentLaw::Linear { d0 } => {
            let _ = writeln!(out, "d_kind = linear\nd_d0 = {d0:?}");
        }
        DetachmentLaw::Constant { d0 } => {
            let _ = writeln!(out, "d_kind = constant\nd_d0 = {d0:?}");
        }
    }
    if let Some(ic) = c.initial {
        let _ = writeln!(out, "# initial state\nh0 = {:?}\nS0 = {:?}\nQ0 = {:?}", ic.h0, ic.s0, ic.q0);
    }
    let s = &c.solver;
    let _ = writeln!(
        out,
        "# solver\nbvp_n = {}\nbvp_tol = {:?}\node_rtol = {:?}\nt_end = {:?}\nsample_dt = {:?}",
        s.bvp_n, s.bvp_tol, s.ode_rtol, s.t_end, s.sample_dt
    );
    out
}
