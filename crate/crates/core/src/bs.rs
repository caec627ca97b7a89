//! Normalized Black-Scholes pricing.
//!
//! A call with spot `S`, strike `K`, maturity `T`, rate `r` and premium `C`
//! is reduced to the forward log-moneyness `x = rT + ln(S/K)`, the
//! time-scaled volatility `v = sigma sqrt(T)` and the normalized price
//! `c = C / sqrt(S e^{-rT} K)`, with
//!
//! ```text
//! c(x, v) = e^{x/2} Phi(x/v + v/2) - e^{-x/2} Phi(x/v - v/2)
//! ```
//!
//! Out-of-the-money prices (`x < 0`) are evaluated through the scaled
//! complementary error function, so values down to the underflow threshold
//! keep their relative accuracy.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::special::{erf, erfc, erfcx};

const CODY_THRESHOLD: f64 = 0.46875;

/// Raw market inputs of a European call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionQuote {
    pub spot: f64,
    pub strike: f64,
    pub maturity: f64,
    pub rate: f64,
    pub premium: f64,
}

impl OptionQuote {
    pub fn new(spot: f64, strike: f64, maturity: f64, rate: f64, premium: f64) -> Result<Self> {
        let q = OptionQuote {
            spot,
            strike,
            maturity,
            rate,
            premium,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidQuote(format!("{name} must be positive, got {v}")))
            }
        };
        positive("spot", self.spot)?;
        positive("strike", self.strike)?;
        positive("maturity", self.maturity)?;
        if !self.rate.is_finite() {
            return Err(Error::InvalidQuote(format!("rate must be finite, got {}", self.rate)));
        }
        if !(self.premium.is_finite() && self.premium >= 0.0) {
            return Err(Error::InvalidQuote(format!(
                "premium must be non-negative, got {}",
                self.premium
            )));
        }
        Ok(())
    }

    /// Black-Scholes premium of this contract at volatility `sigma`; the
    /// quote's own premium is ignored.
    pub fn call_price(&self, sigma: f64) -> Result<f64> {
        let x = self.rate * self.maturity + (self.spot / self.strike).ln();
        let c = normalized_call(x, sigma * self.maturity.sqrt())?;
        Ok(c * self.scale())
    }

    /// Normalization factor `sqrt(S e^{-rT} K)`.
    pub fn scale(&self) -> f64 {
        (self.spot * (-self.rate * self.maturity).exp() * self.strike).sqrt()
    }
}

/// A quote in normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedQuote {
    /// Forward log-moneyness.
    pub x: f64,
    /// Normalized call price.
    pub c: f64,
}

/// Normalized call price `c(x, v)` for any finite `x` and `v > 0`.
///
/// In-the-money arguments are priced through the put-call symmetry
/// `c(x, v) = c(-x, v) + e^{x/2} - e^{-x/2}`.
pub fn normalized_call(x: f64, v: f64) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::domain(format!("volatility must be positive, got {v}")));
    }
    if !x.is_finite() {
        return Err(Error::domain(format!("moneyness must be finite, got {x}")));
    }
    if x > 0.0 {
        return Ok(otm_call(-x, v) + intrinsic(x));
    }
    Ok(otm_call(x, v))
}

/// `c(x, v)` for `x <= 0` and `v > 0`; no argument checks.
pub(crate) fn otm_call(x: f64, v: f64) -> f64 {
    if x == 0.0 {
        return erf(0.5 * FRAC_1_SQRT_2 * v);
    }
    let h = x / v;
    let t = 0.5 * v;
    let q1 = -FRAC_1_SQRT_2 * (h + t);
    let q2 = -FRAC_1_SQRT_2 * (h - t);
    // q1 < q2 since t > 0. Above the Cody threshold the erfc values are tiny
    // and only their scaled difference is representable.
    let two_c = if q1 < CODY_THRESHOLD {
        if q2 < CODY_THRESHOLD {
            (0.5 * x).exp() * erfc(q1) - (-0.5 * x).exp() * erfc(q2)
        } else {
            (0.5 * x).exp() * erfc(q1) - (-0.5 * (h * h + t * t)).exp() * erfcx(q2)
        }
    } else {
        (-0.5 * (h * h + t * t)).exp() * (erfcx(q1) - erfcx(q2))
    };
    (0.5 * two_c).max(0.0)
}

/// Vega of the normalized price, `dc/dv = exp(-x^2/(2v^2) - v^2/8) / sqrt(2 pi)`.
pub fn vega_normalized(x: f64, v: f64) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::domain(format!("volatility must be positive, got {v}")));
    }
    Ok(vega_unchecked(x, v))
}

pub(crate) fn vega_unchecked(x: f64, v: f64) -> f64 {
    (-0.5 * (x / v) * (x / v) - 0.125 * v * v).exp() / (2.0 * PI).sqrt()
}

/// Intrinsic value of the normalized call, `max(e^{x/2} - e^{-x/2}, 0)`.
pub fn intrinsic(x: f64) -> f64 {
    if x > 0.0 {
        2.0 * (0.5 * x).sinh()
    } else {
        0.0
    }
}

/// Maps a raw quote to `(x, c)`. No in-the-money reduction happens here.
pub fn normalize_quote(q: &OptionQuote) -> Result<NormalizedQuote> {
    q.validate()?;
    if q.premium >= q.spot {
        return Err(Error::Arbitrage(format!(
            "premium {} is not below the spot {}",
            q.premium, q.spot
        )));
    }
    let discounted_strike = q.strike * (-q.rate * q.maturity).exp();
    let intrinsic = (q.spot - discounted_strike).max(0.0);
    if q.premium < intrinsic {
        return Err(Error::Arbitrage(format!(
            "premium {} is below the intrinsic value {}",
            q.premium, intrinsic
        )));
    }
    let x = q.rate * q.maturity + (q.spot / q.strike).ln();
    let c = q.premium / q.scale();
    Ok(NormalizedQuote { x, c })
}

/// Reflects an in-the-money quote onto `x <= 0` with the same implied
/// volatility. Requires `intrinsic(x) < c < e^{x/2}`.
pub fn reduce_to_otm(x: f64, c: f64) -> Result<NormalizedQuote> {
    if !x.is_finite() || !c.is_finite() {
        return Err(Error::domain(format!("non-finite quote ({x}, {c})")));
    }
    let upper = (0.5 * x).exp();
    if c >= upper {
        return Err(Error::Arbitrage(format!(
            "normalized price {c} is not below the upper bound {upper}"
        )));
    }
    let floor = intrinsic(x);
    if c <= floor {
        return Err(Error::Arbitrage(format!(
            "normalized price {c} is not above the intrinsic value {floor}"
        )));
    }
    if x <= 0.0 {
        Ok(NormalizedQuote { x, c })
    } else {
        Ok(NormalizedQuote { x: -x, c: c - floor })
    }
}
