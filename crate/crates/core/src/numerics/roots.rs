//! Bracketing scalar root finders.
//!
//! All functions take a fallible closure so that the objective can itself be a
//! solver (a boundary value problem, an IVP) that may fail.

use thiserror::Error;

/// Default absolute bracket tolerance.
pub const ROOT_XTOL: f64 = 1e-12;
const MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError<E> {
    #[error("no sign change on [{a}, {b}]: f(a) = {fa}, f(b) = {fb}")]
    NoSignChange { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("no convergence after {iterations} iterations (bracket width {width})")]
    NoConvergence { iterations: usize, width: f64 },
    #[error("objective evaluation failed: {0}")]
    Eval(E),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

/// Brent's method (inverse quadratic interpolation safeguarded by bisection).
pub fn brent<E, F>(mut f: F, a: f64, b: f64, xtol: f64) -> Result<Root, RootError<E>>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let fa = f(a).map_err(RootError::Eval)?;
    let fb = f(b).map_err(RootError::Eval)?;
    brent_with_values(f, a, b, fa, fb, xtol)
}

/// As [`brent`], reusing already known end-point values.
pub fn brent_with_values<E, F>(
    mut f: F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    xtol: f64,
) -> Result<Root, RootError<E>>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    if fa == 0.0 {
        return Ok(Root { x: a, fx: fa, iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, fx: fb, iterations: 0 });
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(RootError::NoSignChange { a, b, fa, fb });
    }

    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for iter in 1..=MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(Root { x: b, fx: fb, iterations: iter });
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b).map_err(RootError::Eval)?;
    }
    Err(RootError::NoConvergence { iterations: MAX_ITER, width: (c - b).abs() })
}

/// Plain bisection; only the sign of `f` is used.
pub fn bisect<E, F>(mut f: F, a: f64, b: f64, xtol: f64) -> Result<Root, RootError<E>>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let fa = f(a).map_err(RootError::Eval)?;
    let fb = f(b).map_err(RootError::Eval)?;
    if fa == 0.0 {
        return Ok(Root { x: a, fx: fa, iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, fx: fb, iterations: 0 });
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(RootError::NoSignChange { a, b, fa, fb });
    }
    let (mut lo, mut hi) = (a, b);
    let mut flo = fa;
    let mut fmid = fa;
    for iter in 1..=MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= xtol + 2.0 * f64::EPSILON * mid.abs() {
            return Ok(Root { x: mid, fx: fmid, iterations: iter });
        }
        fmid = f(mid).map_err(RootError::Eval)?;
        if fmid == 0.0 {
            return Ok(Root { x: mid, fx: 0.0, iterations: iter });
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    Err(RootError::NoConvergence { iterations: MAX_ITER, width: (hi - lo).abs() })
}

/// Golden-section search for the minimiser of a unimodal function on `[a, b]`.
pub fn golden_section_min<E, F>(mut f: F, a: f64, b: f64, xtol: f64) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while (hi - lo).abs() > xtol {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn ok(x: f64) -> Result<f64, Infallible> {
        Ok(x)
    }

    #[test]
    fn brent_finds_cubic_root() {
        let r = brent(|x| ok(x * x * x - 2.0 * x - 5.0), 2.0, 3.0, 1e-14).unwrap();
        assert!((r.x - 2.0945514815423265).abs() < 1e-13);
    }

    #[test]
    fn brent_rejects_missing_bracket() {
        let r = brent(|x| ok(x * x + 1.0), -1.0, 1.0, 1e-12);
        assert!(matches!(r, Err(RootError::NoSignChange { .. })));
    }

    #[test]
    fn brent_propagates_evaluation_errors() {
        let r = brent(|x| if x > 0.5 { Err("boom") } else { Ok(x - 0.7) }, 0.0, 1.0, 1e-12);
        assert_eq!(r, Err(RootError::Eval("boom")));
    }

    #[test]
    fn bisect_uses_sign_only() {
        let r = bisect(|x| ok(if x < 0.3 { -1.0 } else { 1.0 }), 0.0, 1.0, 1e-13).unwrap();
        assert!((r.x - 0.3).abs() < 1e-12);
    }

    #[test]
    fn golden_section_locates_minimum() {
        let x = golden_section_min(|x| ok((x - 1.25).powi(2)), 0.0, 4.0, 1e-10).unwrap();
        assert!((x - 1.25).abs() < 1e-8);
    }
}
