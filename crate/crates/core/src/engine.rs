//! Online phase: reduction, classification, rescaling and evaluation of the
//! area interpolants, for single quotes and batches.

use std::fmt;

use rayon::prelude::*;

use crate::bs::{normalize_quote, reduce_to_otm, OptionQuote};
use crate::builder::SurfaceModel;
use crate::domain::{classify_with, AreaId, HighVolMap, LinearMap, LowVolMap, PriceMap};
use crate::error::{Error, Result};

/// Relative distance to the `c2` curve inside which `dvdc` uses the
/// medium-volatility side: the high-volatility price map has an unbounded
/// slope there.
pub const SEAM_COLLAR: f64 = 1e-12;

/// Relative excess over the interpolated `c_max` still treated as on it.
pub const TOP_SLACK: f64 = 4e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InversionStatus {
    Ok,
    /// Price below the lowest volatility curve (or moneyness below the range).
    BelowDomain,
    /// Price above the highest volatility curve.
    AboveDomain,
    /// Price outside the no-arbitrage band `(intrinsic, e^{x/2})`.
    Arbitrage,
    /// Non-finite input.
    Invalid,
}

impl InversionStatus {
    pub fn label(self) -> &'static str {
        match self {
            InversionStatus::Ok => "ok",
            InversionStatus::BelowDomain => "out-of-domain-low",
            InversionStatus::AboveDomain => "out-of-domain-high",
            InversionStatus::Arbitrage => "arbitrage-violation",
            InversionStatus::Invalid => "invalid",
        }
    }
}

impl fmt::Display for InversionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionResult {
    /// Time-scaled implied volatility; present iff the status is `Ok`.
    pub v: Option<f64>,
    pub area: Option<AreaId>,
    pub status: InversionStatus,
}

impl InversionResult {
    fn failed(status: InversionStatus) -> Self {
        InversionResult {
            v: None,
            area: None,
            status,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == InversionStatus::Ok
    }
}

fn status_of(e: &Error) -> InversionStatus {
    match e {
        Error::BelowDomain { .. } => InversionStatus::BelowDomain,
        Error::AboveDomain { .. } => InversionStatus::AboveDomain,
        Error::Arbitrage(_) => InversionStatus::Arbitrage,
        _ => InversionStatus::Invalid,
    }
}

/// A quote located inside one area.
struct Located {
    area: AreaId,
    map: PriceMap,
    t_c: f64,
    t_x: f64,
    bounds: (f64, f64),
}

fn locate(model: &SurfaceModel, x: f64, c: f64) -> Result<Located> {
    let q = reduce_to_otm(x, c)?;
    let (x, c) = (q.x, q.c);
    let curves = &model.curves;
    if x < curves.x_min {
        return Err(Error::BelowDomain {
            x,
            c,
            bound: f64::NAN,
        });
    }
    let b = &model.bounds;
    let (c_max, c2, c1) = b.upper(x)?;
    // the top curve is interpolated to about 1e-12 relative, so prices at
    // exactly v_max may land just above it
    let c = if c > c_max && c <= c_max * (1.0 + TOP_SLACK) { c_max } else { c };
    let mut c_min = f64::NAN;
    let area = classify_with(curves, x, c, c_max, c2, c1, || {
        c_min = curves.c_min(x);
        c_min
    })?;
    let (map, bounds) = match area {
        AreaId::I | AreaId::IPrime => (
            PriceMap::Low(LowVolMap::new(x, curves.delta, c_min, c1)?),
            (c_min, c1),
        ),
        AreaId::II => (PriceMap::Medium(LinearMap::new(c1, c2)?), (c1, c2)),
        AreaId::III => (PriceMap::High(HighVolMap::new(x, c2, c_max)?), (c2, c_max)),
    };
    let t_c = map.apply(c).clamp(-1.0, 1.0);
    let t_x = curves.x_map(area).apply(x).clamp(-1.0, 1.0);
    Ok(Located {
        area,
        map,
        t_c,
        t_x,
        bounds,
    })
}

/// Implied time-scaled volatility of the normalized quote `(x, c)`.
/// Quotes with `x > 0` are reflected first.
pub fn invert(model: &SurfaceModel, x: f64, c: f64) -> InversionResult {
    match locate(model, x, c) {
        Ok(loc) => InversionResult {
            v: Some(model.area(loc.area).interp.eval_unit(loc.t_c, loc.t_x)),
            area: Some(loc.area),
            status: InversionStatus::Ok,
        },
        Err(e) => InversionResult::failed(status_of(&e)),
    }
}

/// Elementwise [`invert`], in parallel, preserving order.
pub fn invert_batch(model: &SurfaceModel, quotes: &[(f64, f64)]) -> Vec<InversionResult> {
    quotes.par_iter().map(|&(x, c)| invert(model, x, c)).collect()
}

/// Derivative of the interpolated implied volatility with respect to the
/// normalized price, by the chain rule through the area interpolant.
pub fn dvdc(model: &SurfaceModel, x: f64, c: f64) -> Result<f64> {
    let mut loc = locate(model, x, c)?;
    let q = reduce_to_otm(x, c)?;
    let mut c = q.c;
    if loc.area == AreaId::III {
        let c2 = loc.bounds.0;
        if c - c2 <= SEAM_COLLAR * c2 {
            let c1 = model.bounds.c1.eval(q.x)?;
            let map = LinearMap::new(c1, c2)?;
            c = c2;
            loc = Located {
                area: AreaId::II,
                map: PriceMap::Medium(map),
                t_c: 1.0,
                t_x: model.curves.x_map(AreaId::II).apply(q.x).clamp(-1.0, 1.0),
                bounds: (c1, c2),
            };
        }
    }
    let (_, dv_dt) = model.area(loc.area).interp.eval_unit_with_dx(loc.t_c, loc.t_x);
    Ok(dv_dt * loc.map.slope(c))
}

/// Inversion of a raw quote, with `sigma = v / sqrt(T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuoteInversion {
    pub x: f64,
    pub c: f64,
    pub result: InversionResult,
    pub sigma: Option<f64>,
}

pub fn invert_quote(model: &SurfaceModel, q: &OptionQuote) -> Result<QuoteInversion> {
    q.validate()?;
    let n = match normalize_quote(q) {
        Ok(n) => n,
        Err(Error::Arbitrage(_)) => {
            return Ok(QuoteInversion {
                x: q.rate * q.maturity + (q.spot / q.strike).ln(),
                c: q.premium / q.scale(),
                result: InversionResult::failed(InversionStatus::Arbitrage),
                sigma: None,
            })
        }
        Err(e) => return Err(e),
    };
    let result = invert(model, n.x, n.c);
    Ok(QuoteInversion {
        x: n.x,
        c: n.c,
        result,
        sigma: result.v.map(|v| v / q.maturity.sqrt()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bs::{normalized_call, vega_normalized};
    use crate::builder::{build_surface, AccuracyPreset};
    use crate::special::norm_cdf;
    use std::sync::OnceLock;

    fn low() -> &'static SurfaceModel {
        static M: OnceLock<SurfaceModel> = OnceLock::new();
        M.get_or_init(|| build_surface(AccuracyPreset::Low).unwrap())
    }

    #[test]
    fn examples() {
        let m = low();
        let r = invert(m, -1.0, normalized_call(-1.0, 1.0).unwrap());
        assert_eq!(r.area, Some(AreaId::II));
        assert!((r.v.unwrap() - 1.0).abs() < 1e-5);
        let r = invert(m, 0.0, 0.999);
        assert_eq!(r.status, InversionStatus::AboveDomain);
        assert!(2.0 * norm_cdf(3.0) - 1.0 < 0.999);
        let r = invert(m, 1.0, normalized_call(1.0, 0.5).unwrap());
        assert!((r.v.unwrap() - 0.5).abs() < 1e-5, "{r:?}");
    }

    #[test]
    fn statuses() {
        let m = low();
        assert_eq!(invert(m, -1.0, 0.7).status, InversionStatus::Arbitrage);
        assert_eq!(invert(m, -1.0, 0.0).status, InversionStatus::Arbitrage);
        assert_eq!(invert(m, 1.0, 1.0).status, InversionStatus::Arbitrage);
        assert_eq!(invert(m, -1.0, f64::NAN).status, InversionStatus::Invalid);
        let c = normalized_call(-3.0, 0.08).unwrap();
        assert_eq!(invert(m, -3.0, c).status, InversionStatus::BelowDomain);
        let c = normalized_call(-6.0, 3.0).unwrap();
        assert_eq!(invert(m, -6.0, c).status, InversionStatus::BelowDomain);
    }

    #[test]
    fn batch_matches_single() {
        let m = low();
        assert!(invert_batch(m, &[]).is_empty());
        let quotes: Vec<(f64, f64)> = (0..200)
            .map(|i| {
                let x = -5.0 + 5.0 * i as f64 / 199.0;
                (x, normalized_call(x, 0.2 + 0.02 * i as f64).unwrap())
            })
            .chain([(0.0, 0.999), (-1.0, 2.0)])
            .collect();
        let batch = invert_batch(m, &quotes);
        for (q, r) in quotes.iter().zip(&batch) {
            assert_eq!(*r, invert(m, q.0, q.1));
        }
        let mut reversed = quotes.clone();
        reversed.reverse();
        let mut back = invert_batch(m, &reversed);
        back.reverse();
        assert_eq!(back, batch);
    }

    #[test]
    fn derivative_at_the_money() {
        let m = low();
        let c = 2.0 * norm_cdf(1.0) - 1.0;
        let d = dvdc(m, 0.0, c).unwrap();
        let exact = (2.0 * std::f64::consts::PI).sqrt() * 0.5f64.exp();
        assert!((exact - 4.132_731_354_122_493).abs() < 1e-12);
        assert!((d - exact).abs() / exact < 1e-4, "{d}");
        let v = invert(m, -2.0, normalized_call(-2.0, 1.3).unwrap()).v.unwrap();
        let d = dvdc(m, -2.0, normalized_call(-2.0, 1.3).unwrap()).unwrap();
        assert!((d * vega_normalized(-2.0, v).unwrap() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn derivative_at_high_vol_seam() {
        let m = low();
        let c2 = m.bounds.c2.eval(-1.0).unwrap();
        let on = dvdc(m, -1.0, c2).unwrap();
        let below = dvdc(m, -1.0, c2 * (1.0 - 1e-9)).unwrap();
        assert!((on - below).abs() / on < 1e-4);
    }

    #[test]
    fn quotes() {
        let m = low();
        let q = OptionQuote::new(100.0, 100.0, 1.0, 0.0, 0.0).unwrap();
        let q = OptionQuote {
            premium: q.call_price(0.2).unwrap(),
            ..q
        };
        let r = invert_quote(m, &q).unwrap();
        assert!((r.sigma.unwrap() - 0.2).abs() < 1e-5);
        let q = OptionQuote::new(100.0, 100.0, 4.0, 0.0, 0.0).unwrap();
        let q = OptionQuote {
            premium: q.call_price(2.0).unwrap(),
            ..q
        };
        let r = invert_quote(m, &q).unwrap();
        assert_eq!(r.result.area, Some(AreaId::III));
        assert!((r.sigma.unwrap() - 2.0).abs() < 1e-5);
        let q = OptionQuote::new(100.0, 90.0, 1.0, 0.0, 100.0).unwrap();
        assert_eq!(invert_quote(m, &q).unwrap().result.status, InversionStatus::Arbitrage);
    }
}
