//! Number formatting, CSV tables and atomic file writes.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::dynamics::Trajectory;

pub const TRAJECTORY_HEADER: &str = "t,h,S,Q,u0,flux";
pub const SWEEP_HEADER: &str = "sstar,found,h_star,S_star,Q_star,lambda_plus_washout,verdict";

/// C `printf("%.12g")`.
pub fn fmt_g(v: f64) -> String {
    fmt_g_prec(v, 12)
}

pub fn fmt_g_prec(v: f64, prec: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let p = prec.max(1);
    let sci = format!("{:.*e}", p - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let x: i32 = exp.parse().expect("integer exponent");
    if x < -4 || x >= p as i32 {
        let m = strip_zeros(mantissa);
        let sign = if x < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", x.abs())
    } else {
        let decimals = (p as i32 - 1 - x) as usize;
        strip_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes `contents` to a temporary sibling of `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(64 * (traj.samples.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for s in &traj.samples {
        let st = &s.state;
        let row = [st.t, st.h, st.s, st.q, s.u0, s.flux].map(fmt_g).join(",");
        out.push_str(&row);
        out.push('\n');
    }
    out
}

/// `traj.csv` becomes `traj_3.csv` for `k = 3`.
pub fn suffixed(path: &Path, k: usize) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{k}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{k}"),
    };
    path.with_file_name(name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sstar: f64,
    pub point: Option<[f64; 3]>,
    pub lambda_plus_washout: f64,
    pub verdict: String,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let [h, s, q] = r.point.unwrap_or([f64::NAN; 3]);
        let found = if r.point.is_some() { "1" } else { "0" };
        out.push_str(&format!(
            "{},{found},{},{},{},{},{}\n",
            fmt_g(r.sstar),
            fmt_g(h),
            fmt_g(s),
            fmt_g(q),
            fmt_g(r.lambda_plus_washout),
            r.verdict
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        // reference strings from printf("%.12g")
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (0.1, "0.1"),
            (2.0 / 3.0, "0.666666666667"),
            (-2.0 / 3.0, "-0.666666666667"),
            (100.0, "100"),
            (123456789012.0, "123456789012"),
            (1234567890123.0, "1.23456789012e+12"),
            (1e-4, "0.0001"),
            (1.5e-5, "1.5e-05"),
            (1e-10, "1e-10"),
            (0.9225727806222737, "0.922572780622"),
            (9.9999999999999e-5, "0.0001"),
            (1e300, "1e+300"),
            (f64::NAN, "nan"),
        ];
        for (v, s) in cases {
            assert_eq!(fmt_g(v), s, "{v:e}");
        }
    }

    #[test]
    fn suffix_before_extension() {
        assert_eq!(suffixed(Path::new("out/traj.csv"), 2), PathBuf::from("out/traj_2.csv"));
        assert_eq!(suffixed(Path::new("traj"), 1), PathBuf::from("traj_1"));
    }

    #[test]
    fn sweep_row_without_point() {
        let rows = [SweepRow { sstar: 0.5, point: None, lambda_plus_washout: -2.0 / 3.0, verdict: "NA".into() }];
        assert_eq!(
            sweep_csv(&rows),
            "sstar,found,h_star,S_star,Q_star,lambda_plus_washout,verdict\n0.5,0,nan,nan,nan,-0.666666666667,NA\n"
        );
    }
}
