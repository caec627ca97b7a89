//! Iterative implied-volatility solver used to sample interpolation nodes and
//! as the reference the engine is measured against.

use std::fmt;

use crate::bs::{otm_call, vega_unchecked};
use crate::domain::{inflection_vol, BoundaryCurves};
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;

/// Floor for `ln c` when the price underflows to zero.
const LN_FLOOR: f64 = -750.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Newton,
    Brent,
}

impl fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveMethod::Newton => "newton",
            SolveMethod::Brent => "brent",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSolveReport {
    pub v: f64,
    pub iterations: usize,
    pub method: SolveMethod,
    /// `|c(x, v) - c_target|`
    pub residual: f64,
}

fn safe_ln(c: f64) -> f64 {
    if c > 0.0 {
        c.ln()
    } else {
        LN_FLOOR
    }
}

/// Search bracket `[v_min(x) / 2, 1.1 v_max]`.
pub fn oracle_bracket(x: f64) -> (f64, f64) {
    let b = BoundaryCurves::default();
    let v_min = (b.v_min.0 + b.v_min.1 * x).max(b.v_min.0);
    (0.5 * v_min, 1.1 * b.v_max)
}

fn check_inputs(x: f64, c: f64, tol: f64) -> Result<()> {
    if !x.is_finite() || x > 0.0 {
        return Err(Error::domain(format!("oracle needs finite x <= 0, got {x}")));
    }
    if !(c > 0.0) || c >= (0.5 * x).exp() {
        return Err(Error::domain(format!("price {c} outside (0, e^(x/2)) at x = {x}")));
    }
    if !(tol > 0.0) {
        return Err(Error::argument(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

fn report(x: f64, c: f64, v: f64, iterations: usize, method: SolveMethod) -> RootSolveReport {
    RootSolveReport {
        v,
        iterations,
        method,
        residual: (otm_call(x, v) - c).abs(),
    }
}

/// Newton's method started at the inflection point, on `ln c` below the
/// inflection price and on `c` above it, falling back to Brent-Dekker if an
/// iterate leaves the bracket or the iteration fails to settle.
pub fn implied_vol_oracle(x: f64, c: f64, tol: f64) -> Result<RootSolveReport> {
    check_inputs(x, c, tol)?;
    match newton(x, c, tol) {
        Ok(r) => Ok(r),
        Err(_) => brent_vol(x, c, tol),
    }
}

/// The Newton path alone; fails instead of falling back.
pub fn newton_vol(x: f64, c: f64, tol: f64) -> Result<RootSolveReport> {
    check_inputs(x, c, tol)?;
    newton(x, c, tol)
}

fn newton(x: f64, c: f64, tol: f64) -> Result<RootSolveReport> {
    let (mut lo, mut hi) = oracle_bracket(x);
    let curves = BoundaryCurves::default();
    let v_min = curves.v_min.0 + curves.v_min.1 * x;
    let mut v = inflection_vol(x).clamp(v_min, curves.v_max);
    let log_space = c < otm_call(x, v);
    let ln_target = c.ln();
    let mut last_step = f64::INFINITY;
    let mut small_steps = 0usize;
    for it in 1..=MAX_ITERATIONS {
        let price = otm_call(x, v);
        let vega = vega_unchecked(x, v);
        if price < c {
            lo = v;
        } else if price > c {
            hi = v;
        } else {
            return Ok(report(x, c, v, it, SolveMethod::Newton));
        }
        let tangent = if price > 1e-300 && vega > 0.0 {
            let step = if log_space {
                (safe_ln(price) - ln_target) * price / vega
            } else {
                (price - c) / vega
            };
            v - step
        } else {
            f64::NAN
        };
        let step = (v - tangent).abs();
        if step < tol {
            return Ok(report(x, c, tangent, it, SolveMethod::Newton));
        }
        // rounding floor: steps stop shrinking although they are tiny
        if step < 1e-9 * v && step > 0.5 * last_step {
            small_steps += 1;
            if small_steps >= 3 {
                return Ok(report(x, c, tangent, it, SolveMethod::Newton));
            }
        }
        last_step = step;
        // bisect when the tangent leaves the bracket or the price underflows
        v = if tangent > lo && tangent < hi { tangent } else { 0.5 * (lo + hi) };
        if hi - lo < tol {
            return Ok(report(x, c, v, it, SolveMethod::Newton));
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        best: v,
        residual: (otm_call(x, v) - c).abs(),
    })
}

/// Brent-Dekker on `[v_min/2, 1.1 v_max]`.
pub fn brent_vol(x: f64, c: f64, tol: f64) -> Result<RootSolveReport> {
    check_inputs(x, c, tol)?;
    let (lo, hi) = oracle_bracket(x);
    let ln_target = c.ln();
    let (v, iterations) = brent(|v| safe_ln(otm_call(x, v)) - ln_target, lo, hi, tol)?;
    Ok(report(x, c, v, iterations, SolveMethod::Brent))
}

/// Brent-Dekker root finding on `[a, b]`; `f(a)` and `f(b)` must differ in sign.
/// Returns the root and the number of iterations.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64) -> Result<(f64, usize)> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok((a, 0));
    }
    if fb == 0.0 {
        return Ok((b, 0));
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::domain(format!(
            "root not bracketed on [{a}, {b}] (f = {fa}, {fb})"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for it in 1..=MAX_ITERATIONS {
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
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok((b, it));
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        best: b,
        residual: fb.abs(),
    })
}
