//! Normalized call prices under the Laplace market model and their
//! inversion by a single-rectangle low-rank interpolant.

use std::f64::consts::SQRT_2;

use crate::cheb::{lowrank_fit_fixed, LowRank2D};
use crate::error::{Error, Result};
use crate::oracle::brent;

pub const LAPLACE_X_RANGE: (f64, f64) = (-0.4, 0.0);
pub const LAPLACE_V_RANGE: (f64, f64) = (0.25, 1.0);

/// Normalized Laplace-model call price. The log-return is Laplace
/// distributed with standard deviation `v` and martingale drift, which
/// requires `0 < v < sqrt(2)`. Any finite `x` is accepted.
pub fn laplace_normalized_call(x: f64, v: f64) -> Result<f64> {
    if !(v > 0.0 && v < SQRT_2) {
        return Err(Error::domain(format!("Laplace volatility must lie in (0, sqrt 2), got {v}")));
    }
    if !x.is_finite() {
        return Err(Error::domain(format!("non-finite moneyness {x}")));
    }
    let d = (-x - (1.0 - 0.5 * v * v).ln()) / v;
    let (up, down) = ((0.5 * x).exp(), (-0.5 * x).exp());
    Ok(if d >= 0.0 {
        up * 0.5 * (-(SQRT_2 - v) * d).exp() * (1.0 + v / SQRT_2) - down * 0.5 * (-SQRT_2 * d).exp()
    } else {
        let a = -d;
        down * (0.5 * (-SQRT_2 * a).exp() - 1.0) - up * (0.5 * (-(SQRT_2 + v) * a).exp() * (1.0 - v / SQRT_2) - 1.0)
    })
}

fn price(x: f64, v: f64) -> f64 {
    laplace_normalized_call(x, v).unwrap_or(f64::NAN)
}

/// Volatility of `c` at `x` by Brent-Dekker inside `(0, sqrt 2)`.
pub fn laplace_implied_vol(x: f64, c: f64, lo: f64, hi: f64) -> Result<f64> {
    brent(|v| price(x, v) - c, lo, hi, 1e-15)
        .map(|(v, _)| v)
        .map_err(|e| Error::Build {
            what: format!("Laplace node (x = {x}, c = {c})"),
            source: Box::new(e),
        })
}

/// Interpolant of the Laplace implied volatility over the rectangle, with
/// the price variable scaled linearly between `c(x, 0.25)` and `c(x, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceSurface {
    pub interp: LowRank2D,
    pub order: usize,
    pub tol: f64,
    pub residual: f64,
}

fn price_bracket(x: f64) -> (f64, f64) {
    (price(x, LAPLACE_V_RANGE.0), price(x, LAPLACE_V_RANGE.1))
}

pub fn build_laplace_surface(order: usize, tol: f64) -> Result<LaplaceSurface> {
    if order < 5 {
        return Err(Error::argument(format!("order must be at least 5, got {order}")));
    }
    if !(tol > 0.0) {
        return Err(Error::argument(format!("tolerance must be positive, got {tol}")));
    }
    let f = |t_c: f64, x: f64| {
        let (lo, hi) = price_bracket(x);
        let c = lo + 0.5 * (t_c + 1.0) * (hi - lo);
        laplace_implied_vol(x, c, 0.5 * LAPLACE_V_RANGE.0, 1.2)
    };
    let fit = lowrank_fit_fixed(f, order, (-1.0, 1.0), LAPLACE_X_RANGE, tol)?;
    Ok(LaplaceSurface {
        interp: fit.model,
        order,
        tol,
        residual: fit.residual,
    })
}

impl LaplaceSurface {
    /// Interpolated volatility of `(x, c)` inside the rectangle.
    pub fn invert(&self, x: f64, c: f64) -> Result<f64> {
        let (x0, x1) = LAPLACE_X_RANGE;
        if !x.is_finite() || x < x0 || x > x1 {
            return Err(Error::domain(format!("moneyness {x} outside [{x0}, {x1}]")));
        }
        if c.is_nan() {
            return Err(Error::domain("price is NaN"));
        }
        let (lo, hi) = price_bracket(x);
        if c < lo {
            return Err(Error::BelowDomain { x, c, bound: lo });
        }
        if c > hi {
            return Err(Error::AboveDomain { x, c, bound: hi });
        }
        let t_c = (2.0 * (c - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0);
        self.interp.eval(t_c, x)
    }
}

pub fn laplace_invert(s: &LaplaceSurface, x: f64, c: f64) -> Result<f64> {
    s.invert(x, c)
}
