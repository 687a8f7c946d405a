//! Static time-series plots: three stacked 800x600 panels for h, S and Q.

use std::fmt::Write as _;

use super::output::fmt_g_prec;
use crate::dynamics::Trajectory;

const W: f64 = 800.0;
const H: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Roughly five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn panel(out: &mut String, index: usize, label: &str, trajs: &[Trajectory], pick: fn(&crate::dynamics::Sample) -> f64, guide: Option<f64>) {
    let t0 = trajs.iter().filter_map(|t| t.samples.first()).map(|s| s.state.t).fold(f64::INFINITY, f64::min);
    let t1 = trajs.iter().filter_map(|t| t.samples.last()).map(|s| s.state.t).fold(f64::NEG_INFINITY, f64::max);
    let (t0, t1) = if t1 > t0 { (t0, t1) } else { (t0, t0 + 1.0) };
    let mut lo = 0f64;
    let mut hi = trajs.iter().flat_map(|t| t.samples.iter().map(pick)).fold(0.0, f64::max);
    if let Some(g) = guide {
        hi = hi.max(g);
        lo = lo.min(g);
    }
    if hi <= lo {
        hi = lo + 1.0;
    }
    hi += 0.05 * (hi - lo);
    let px = |t: f64| LEFT + (t - t0) / (t1 - t0) * (W - LEFT - RIGHT);
    let py = |v: f64| H - BOTTOM - (v - lo) / (hi - lo) * (H - TOP - BOTTOM);

    let _ = writeln!(out, r#"<svg x="0" y="{}" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#, index as f64 * H);
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    for t in ticks(t0, t1) {
        let x = px(t);
        let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, H - BOTTOM, H - BOTTOM + 6.0);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{}" font-size="14" text-anchor="middle">{}</text>"#, H - BOTTOM + 22.0, fmt_g_prec(t, 6));
    }
    for v in ticks(lo, hi) {
        let y = py(v);
        let _ = writeln!(out, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 6.0);
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" font-size="14" text-anchor="end">{}</text>"#, LEFT - 10.0, y + 5.0, fmt_g_prec(v, 6));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="16" text-anchor="middle">t</text>"#, (LEFT + W - RIGHT) / 2.0, H - 15.0);
    let _ = writeln!(out, r#"<text x="20" y="{}" font-size="18" text-anchor="middle">{label}</text>"#, (TOP + H - BOTTOM) / 2.0);
    if let Some(g) = guide {
        let y = py(g);
        let _ = writeln!(
            out,
            r#"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="gray" stroke-dasharray="8,6"/>"#,
            W - RIGHT
        );
    }
    for (k, tr) in trajs.iter().enumerate() {
        let pts: Vec<String> = tr.samples.iter().map(|s| format!("{:.2},{:.2}", px(s.state.t), py(pick(s)))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
            COLORS[k % COLORS.len()],
            pts.join(" ")
        );
    }
    out.push_str("</svg>\n");
}

/// One SVG document with panels for `h`, `S` and `Q`; `guide` draws dashed lines at an equilibrium.
pub fn render(trajs: &[Trajectory], guide: Option<[f64; 3]>) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{}" viewBox="0 0 {W} {}">"#,
        3.0 * H,
        3.0 * H
    );
    panel(&mut out, 0, "h", trajs, |s| s.state.h, guide.map(|g| g[0]));
    panel(&mut out, 1, "S", trajs, |s| s.state.s, guide.map(|g| g[1]));
    panel(&mut out, 2, "Q", trajs, |s| s.state.q, guide.map(|g| g[2]));
    out.push_str("</svg>\n");
    out
}
