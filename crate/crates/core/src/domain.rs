//! Geometry of the interpolation domain: the boundary volatility curves,
//! the four interpolation areas and the price/moneyness rescalings that map
//! each area onto `[-1, 1]^2`.

use std::fmt;
use std::str::FromStr;

use crate::bs::{otm_call, vega_unchecked};
use crate::error::{Error, Result};

const X_SLACK: f64 = 1e-12;

/// Linear boundary volatilities and the moneyness range of the engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCurves {
    /// `v_min(x) = v_min.0 + v_min.1 * x`
    pub v_min: (f64, f64),
    pub v1: (f64, f64),
    pub v2: (f64, f64),
    pub v_max: f64,
    pub x_min: f64,
    pub x_max: f64,
    /// Moneyness separating Area I from Area I'.
    pub x_split: f64,
    /// Shift in the low-volatility rescaling; keeps it finite at `x = 0`.
    pub delta: f64,
}

pub const DEFAULT_DELTA: f64 = 1.0;

impl Default for BoundaryCurves {
    fn default() -> Self {
        BoundaryCurves {
            v_min: (0.001, -0.03),
            v1: (0.25, -0.4),
            v2: (2.0, -0.4),
            v_max: 6.0,
            x_min: -5.0,
            x_max: 0.0,
            x_split: -0.0348,
            delta: DEFAULT_DELTA,
        }
    }
}

/// Boundary volatilities at one moneyness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryVols {
    pub v_min: f64,
    pub v1: f64,
    pub v2: f64,
    pub v_max: f64,
}

/// Boundary prices at one moneyness, `c(x, v_min(x))` and so on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPrices {
    pub c_min: f64,
    pub c1: f64,
    pub c2: f64,
    pub c_max: f64,
}

impl BoundaryCurves {
    pub fn with_delta(delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::argument(format!("delta must be positive, got {delta}")));
        }
        Ok(BoundaryCurves {
            delta,
            ..BoundaryCurves::default()
        })
    }

    pub fn check_x(&self, x: f64) -> Result<()> {
        if x.is_nan() || x < self.x_min - X_SLACK || x > self.x_max + X_SLACK {
            return Err(Error::domain(format!(
                "moneyness {x} outside [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        Ok(())
    }

    pub fn boundary_vols(&self, x: f64) -> Result<BoundaryVols> {
        self.check_x(x)?;
        Ok(self.vols_unchecked(x))
    }

    pub(crate) fn vols_unchecked(&self, x: f64) -> BoundaryVols {
        BoundaryVols {
            v_min: self.v_min.0 + self.v_min.1 * x,
            v1: self.v1.0 + self.v1.1 * x,
            v2: self.v2.0 + self.v2.1 * x,
            v_max: self.v_max,
        }
    }

    /// Boundary prices by direct pricing.
    pub fn boundary_prices(&self, x: f64) -> Result<BoundaryPrices> {
        let v = self.boundary_vols(x)?;
        Ok(BoundaryPrices {
            c_min: otm_call(x, v.v_min),
            c1: otm_call(x, v.v1),
            c2: otm_call(x, v.v2),
            c_max: otm_call(x, v.v_max),
        })
    }

    pub fn c_min(&self, x: f64) -> f64 {
        otm_call(x, self.v_min.0 + self.v_min.1 * x)
    }

    /// Moneyness interval covered by `area`.
    pub fn x_range(&self, area: AreaId) -> (f64, f64) {
        match area {
            AreaId::I => (self.x_min, self.x_split),
            AreaId::IPrime => (self.x_split, self.x_max),
            AreaId::II | AreaId::III => (self.x_min, self.x_max),
        }
    }

    /// Volatility bracket of `area` at `x`.
    pub fn vol_bracket(&self, area: AreaId, x: f64) -> (f64, f64) {
        let v = self.vols_unchecked(x);
        match area {
            AreaId::I | AreaId::IPrime => (v.v_min, v.v1),
            AreaId::II => (v.v1, v.v2),
            AreaId::III => (v.v2, v.v_max),
        }
    }

    /// Area holding moneyness `x` in the low-volatility band.
    pub fn low_area(&self, x: f64) -> AreaId {
        if x >= self.x_split {
            AreaId::IPrime
        } else {
            AreaId::I
        }
    }

    /// Moneyness scaling of `area`.
    pub fn x_map(&self, area: AreaId) -> LinearMap {
        let (lo, hi) = self.x_range(area);
        LinearMap { lo, hi }
    }
}

/// Inflection point of `v -> c(x, v)`, `sqrt(2|x|)`.
pub fn inflection_vol(x: f64) -> f64 {
    (2.0 * x.abs()).sqrt()
}

/// Zeros of the tangent to `v -> c(x, v)` at the inflection point, hitting
/// the price levels 0 and `e^{x/2}`.
pub fn tangent_bounds(x: f64) -> Result<(f64, f64)> {
    if !(x < 0.0) || !x.is_finite() {
        return Err(Error::domain(format!(
            "tangent bounds need x < 0 (the inflection point degenerates at 0), got {x}"
        )));
    }
    let vc = inflection_vol(x);
    let c = otm_call(x, vc);
    let vega = vega_unchecked(x, vc);
    Ok((vc - c / vega, vc + ((0.5 * x).exp() - c) / vega))
}

/// One of the four interpolation areas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AreaId {
    /// Low volatilities, `x < x_split`.
    I,
    /// Low volatilities, `x >= x_split`.
    IPrime,
    /// Medium volatilities.
    II,
    /// High volatilities.
    III,
}

impl AreaId {
    pub const ALL: [AreaId; 4] = [AreaId::I, AreaId::IPrime, AreaId::II, AreaId::III];

    pub fn label(self) -> &'static str {
        match self {
            AreaId::I => "I",
            AreaId::IPrime => "I'",
            AreaId::II => "II",
            AreaId::III => "III",
        }
    }
}

impl fmt::Display for AreaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AreaId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" => Ok(AreaId::I),
            "I'" => Ok(AreaId::IPrime),
            "II" => Ok(AreaId::II),
            "III" => Ok(AreaId::III),
            other => Err(Error::argument(format!("unknown area `{other}`"))),
        }
    }
}

/// Assigns `c` to an area. Bounds are consulted in the order `c_max`, `c2`,
/// `c1` and only then `c_min`, which is the expensive one.
///
/// Ties: `c = c1` goes to II, `c = c2` and `c = c_max` to III, `c = c_min`
/// to I/I'. Moneyness exactly at the split belongs to I'.
pub fn classify_with(
    curves: &BoundaryCurves,
    x: f64,
    c: f64,
    c_max: f64,
    c2: f64,
    c1: f64,
    c_min: impl FnOnce() -> f64,
) -> Result<AreaId> {
    if c > c_max {
        return Err(Error::AboveDomain { x, c, bound: c_max });
    }
    if c >= c2 {
        return Ok(AreaId::III);
    }
    if c >= c1 {
        return Ok(AreaId::II);
    }
    let lowest = c_min();
    if c < lowest {
        return Err(Error::BelowDomain { x, c, bound: lowest });
    }
    Ok(curves.low_area(x))
}

pub fn classify(curves: &BoundaryCurves, x: f64, c: f64, prices: &BoundaryPrices) -> Result<AreaId> {
    curves.check_x(x)?;
    if c.is_nan() {
        return Err(Error::domain("price is NaN"));
    }
    classify_with(curves, x, c, prices.c_max, prices.c2, prices.c1, || prices.c_min)
}

/// Scaled coordinates of a quote inside its area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledCoord {
    pub t_c: f64,
    pub t_x: f64,
}

fn check_unit(t: f64) -> Result<()> {
    if t.is_nan() || t.abs() > 1.0 + X_SLACK {
        return Err(Error::domain(format!("scaled coordinate {t} outside [-1, 1]")));
    }
    Ok(())
}

fn check_bracket(c: f64, lo: f64, hi: f64) -> Result<()> {
    let slack = 1e-14 * hi.abs();
    if c.is_nan() || c < lo - slack || c > hi + slack {
        return Err(Error::domain(format!("price {c} outside [{lo}, {hi}]")));
    }
    Ok(())
}

/// Affine map of `[lo, hi]` onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearMap {
    pub lo: f64,
    pub hi: f64,
}

impl LinearMap {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::domain(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(LinearMap { lo, hi })
    }

    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        1.0 - 2.0 * (self.hi - z) / (self.hi - self.lo)
    }

    #[inline]
    pub fn invert(&self, t: f64) -> f64 {
        self.lo + 0.5 * (t + 1.0) * (self.hi - self.lo)
    }

    pub fn forward(&self, z: f64) -> Result<f64> {
        check_bracket(z, self.lo, self.hi)?;
        Ok(self.apply(z).clamp(-1.0, 1.0))
    }

    pub fn inverse(&self, t: f64) -> Result<f64> {
        check_unit(t)?;
        Ok(self.invert(t.clamp(-1.0, 1.0)))
    }

    /// `dt/dz`
    pub fn slope(&self) -> f64 {
        2.0 / (self.hi - self.lo)
    }
}

/// Low-volatility price scaling on `[c_min, c1]`.
///
/// The inner map `2 (1 + 2 ln(c1/c) / (x - delta)^2)^{-1/2} - 1` straightens
/// the Gaussian-tail behaviour of the price; an affine map then sends
/// `[inner(c_min), 1]` onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowVolMap {
    ln_c1: f64,
    scale: f64,
    inner_min: f64,
    c_min: f64,
    c1: f64,
}

impl LowVolMap {
    pub fn new(x: f64, delta: f64, c_min: f64, c1: f64) -> Result<Self> {
        if !(c_min > 0.0 && c_min < c1) {
            return Err(Error::domain(format!("invalid low-vol bracket [{c_min}, {c1}]")));
        }
        if !(delta > 0.0) {
            return Err(Error::domain(format!("delta must be positive, got {delta}")));
        }
        let shift = x - delta;
        let mut m = LowVolMap {
            ln_c1: c1.ln(),
            scale: shift * shift,
            inner_min: -1.0,
            c_min,
            c1,
        };
        m.inner_min = m.inner(c_min);
        Ok(m)
    }

    #[inline]
    fn inner(&self, c: f64) -> f64 {
        2.0 / (1.0 + 2.0 * (self.ln_c1 - c.ln()) / self.scale).sqrt() - 1.0
    }

    #[inline]
    pub fn apply(&self, c: f64) -> f64 {
        2.0 * (self.inner(c) - self.inner_min) / (1.0 - self.inner_min) - 1.0
    }

    #[inline]
    pub fn invert(&self, t: f64) -> f64 {
        let inner = self.inner_min + 0.5 * (t + 1.0) * (1.0 - self.inner_min);
        let u = inner + 1.0;
        (self.ln_c1 - 2.0 * self.scale / (u * u) + 0.5 * self.scale).exp()
    }

    /// `dt/dc`
    pub fn slope(&self, c: f64) -> f64 {
        let q = 1.0 + 2.0 * (self.ln_c1 - c.ln()) / self.scale;
        let d_inner = 2.0 / (q * q.sqrt() * self.scale * c);
        2.0 * d_inner / (1.0 - self.inner_min)
    }

    pub fn forward(&self, c: f64) -> Result<f64> {
        check_bracket(c, self.c_min, self.c1)?;
        Ok(self.apply(c).clamp(-1.0, 1.0))
    }

    pub fn inverse(&self, t: f64) -> Result<f64> {
        check_unit(t)?;
        Ok(self.invert(t.clamp(-1.0, 1.0)))
    }
}

/// High-volatility price scaling on `[c2, c_max]`.
///
/// The inner map `sqrt(-8 ln((e^{x/2} - c) / (e^{x/2} - c2)))` grows like
/// `v` for large volatilities; it is normalized by its value at `c_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighVolMap {
    cap: f64,
    gap2: f64,
    inner_max: f64,
    c2: f64,
    c_max: f64,
}

impl HighVolMap {
    pub fn new(x: f64, c2: f64, c_max: f64) -> Result<Self> {
        let cap = (0.5 * x).exp();
        if !(c2 < c_max && c_max < cap) {
            return Err(Error::domain(format!(
                "invalid high-vol bracket [{c2}, {c_max}] below {cap}"
            )));
        }
        let mut m = HighVolMap {
            cap,
            gap2: cap - c2,
            inner_max: 1.0,
            c2,
            c_max,
        };
        m.inner_max = m.inner(c_max);
        Ok(m)
    }

    #[inline]
    fn inner(&self, c: f64) -> f64 {
        (-8.0 * ((self.cap - c) / self.gap2).ln()).max(0.0).sqrt()
    }

    #[inline]
    pub fn apply(&self, c: f64) -> f64 {
        2.0 * self.inner(c) / self.inner_max - 1.0
    }

    #[inline]
    pub fn invert(&self, t: f64) -> f64 {
        let inner = 0.5 * (t + 1.0) * self.inner_max;
        self.cap - self.gap2 * (-0.125 * inner * inner).exp()
    }

    /// `dt/dc`; unbounded at `c = c2`.
    pub fn slope(&self, c: f64) -> f64 {
        let inner = self.inner(c);
        2.0 / self.inner_max * 4.0 / (inner * (self.cap - c))
    }

    pub fn forward(&self, c: f64) -> Result<f64> {
        check_bracket(c, self.c2, self.c_max)?;
        Ok(self.apply(c).clamp(-1.0, 1.0))
    }

    pub fn inverse(&self, t: f64) -> Result<f64> {
        check_unit(t)?;
        Ok(self.invert(t.clamp(-1.0, 1.0)))
    }
}

/// The price scaling used by an area at a given moneyness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriceMap {
    Low(LowVolMap),
    Medium(LinearMap),
    High(HighVolMap),
}

impl PriceMap {
    /// Price map of `area` at `x`, given the boundary prices there.
    pub fn for_area(curves: &BoundaryCurves, area: AreaId, x: f64, p: &BoundaryPrices) -> Result<Self> {
        Ok(match area {
            AreaId::I | AreaId::IPrime => PriceMap::Low(LowVolMap::new(x, curves.delta, p.c_min, p.c1)?),
            AreaId::II => PriceMap::Medium(LinearMap::new(p.c1, p.c2)?),
            AreaId::III => PriceMap::High(HighVolMap::new(x, p.c2, p.c_max)?),
        })
    }

    #[inline]
    pub fn apply(&self, c: f64) -> f64 {
        match self {
            PriceMap::Low(m) => m.apply(c),
            PriceMap::Medium(m) => m.apply(c),
            PriceMap::High(m) => m.apply(c),
        }
    }

    #[inline]
    pub fn invert(&self, t: f64) -> f64 {
        match self {
            PriceMap::Low(m) => m.invert(t),
            PriceMap::Medium(m) => m.invert(t),
            PriceMap::High(m) => m.invert(t),
        }
    }

    pub fn slope(&self, c: f64) -> f64 {
        match self {
            PriceMap::Low(m) => m.slope(c),
            PriceMap::Medium(m) => m.slope(),
            PriceMap::High(m) => m.slope(c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bs::normalized_call;

    #[test]
    fn boundary_vols_at_ends() {
        let b = BoundaryCurves::default();
        let v = b.boundary_vols(0.0).unwrap();
        assert_eq!((v.v_min, v.v1, v.v2, v.v_max), (0.001, 0.25, 2.0, 6.0));
        let v = b.boundary_vols(-5.0).unwrap();
        assert!((v.v_min - 0.151).abs() < 1e-15);
        assert!((v.v1 - 2.25).abs() < 1e-15);
        assert!((v.v2 - 4.0).abs() < 1e-15);
        assert_eq!(v.v_max, 6.0);
        assert!(b.boundary_vols(0.1).is_err());
        assert!(b.boundary_vols(-5.1).is_err());
    }

    #[test]
    fn boundary_ordering() {
        let b = BoundaryCurves::default();
        for i in 0..1000 {
            let x = -5.0 * ((i as f64 * 0.754_877_666) % 1.0);
            let v = b.boundary_vols(x).unwrap();
            assert!(0.0 < v.v_min && v.v_min < v.v1 && v.v1 < v.v2 && v.v2 < v.v_max);
        }
    }

    #[test]
    fn inflection_and_split() {
        assert_eq!(inflection_vol(-2.0), 2.0);
        assert_eq!(inflection_vol(0.0), 0.0);
        let b = BoundaryCurves::default();
        let vc = inflection_vol(b.x_split);
        assert!((vc - 0.263_818_119_165_458_6).abs() < 1e-12);
        let v1 = b.boundary_vols(b.x_split).unwrap().v1;
        assert!((vc - v1).abs() < 1e-3);
        // exact root of sqrt(2|x|) = 0.25 - 0.4 x near the stored constant
        let root = {
            let (mut lo, mut hi) = (-0.04f64, -0.03f64);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if inflection_vol(mid) - (0.25 - 0.4 * mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        assert!((root - b.x_split).abs() < 5e-5, "root {root}");
    }

    #[test]
    fn tangent_bounds_bracket_inflection() {
        for &x in &[-5.0, -2.0, -1.0, -0.3, -0.01] {
            let (lo, hi) = tangent_bounds(x).unwrap();
            let vc = inflection_vol(x);
            assert!(lo < vc && vc < hi, "x = {x}");
        }
        let (lo, hi) = tangent_bounds(-1.0).unwrap();
        let vc = 2.0f64.sqrt();
        let c = normalized_call(-1.0, vc).unwrap();
        let vega = crate::bs::vega_normalized(-1.0, vc).unwrap();
        assert!((lo - (vc - c / vega)).abs() < 1e-15);
        assert!((hi - (vc + ((-0.5f64).exp() - c) / vega)).abs() < 1e-14);
        let a = tangent_bounds(-1e-3).unwrap().0;
        let b = tangent_bounds(-1e-6).unwrap().0;
        assert!(b < a && b < 1e-2);
        assert!(tangent_bounds(0.0).is_err());
    }

    #[test]
    fn classify_examples() {
        let b = BoundaryCurves::default();
        let at = |x: f64, v: f64| {
            let c = normalized_call(x, v).unwrap();
            classify(&b, x, c, &b.boundary_prices(x).unwrap())
        };
        assert_eq!(at(-1.0, 1.0).unwrap(), AreaId::II);
        assert!(matches!(at(-3.0, 0.05), Err(Error::BelowDomain { .. })));
        assert_eq!(at(-0.01, 0.1).unwrap(), AreaId::IPrime);
        assert_eq!(at(-2.0, 0.5).unwrap(), AreaId::I);
        assert_eq!(at(-2.0, 5.0).unwrap(), AreaId::III);
        assert!(matches!(at(-2.0, 7.0), Err(Error::AboveDomain { .. })));
    }

    #[test]
    fn classify_ties() {
        let b = BoundaryCurves::default();
        let x = -1.5;
        let p = b.boundary_prices(x).unwrap();
        assert_eq!(classify(&b, x, p.c1, &p).unwrap(), AreaId::II);
        assert_eq!(classify(&b, x, p.c2, &p).unwrap(), AreaId::III);
        assert_eq!(classify(&b, x, p.c_max, &p).unwrap(), AreaId::III);
        assert_eq!(classify(&b, x, p.c_min, &p).unwrap(), AreaId::I);
        let xs = b.x_split;
        let p = b.boundary_prices(xs).unwrap();
        assert_eq!(classify(&b, xs, p.c_min, &p).unwrap(), AreaId::IPrime);
    }

    #[test]
    fn classify_order_skips_c_min() {
        let b = BoundaryCurves::default();
        let x = -1.0;
        let p = b.boundary_prices(x).unwrap();
        let area = classify_with(&b, x, 0.5 * (p.c1 + p.c2), p.c_max, p.c2, p.c1, || {
            panic!("c_min must not be evaluated above c1")
        })
        .unwrap();
        assert_eq!(area, AreaId::II);
    }

    #[test]
    fn x_maps() {
        let b = BoundaryCurves::default();
        let m = b.x_map(AreaId::II);
        assert_eq!(m.forward(-5.0).unwrap(), -1.0);
        assert_eq!(m.forward(0.0).unwrap(), 1.0);
        assert_eq!(m.forward(-2.5).unwrap(), 0.0);
        assert!(m.forward(0.5).is_err());
        assert_eq!(b.x_map(AreaId::I).forward(b.x_split).unwrap(), 1.0);
        assert_eq!(b.x_map(AreaId::IPrime).forward(b.x_split).unwrap(), -1.0);
    }

    #[test]
    fn medium_map() {
        let m = LinearMap::new(0.2, 0.6).unwrap();
        assert_eq!(m.forward(0.2).unwrap(), -1.0);
        assert_eq!(m.forward(0.6).unwrap(), 1.0);
        assert!(m.forward(0.4).unwrap().abs() < 1e-15);
        assert!(m.forward(0.7).is_err());
        assert!((m.inverse(0.0).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn low_map_endpoints_and_inverse() {
        let b = BoundaryCurves::default();
        let x = -2.0;
        let p = b.boundary_prices(x).unwrap();
        let m = LowVolMap::new(x, b.delta, p.c_min, p.c1).unwrap();
        assert!((m.forward(p.c1).unwrap() - 1.0).abs() < 1e-15);
        assert!((m.forward(p.c_min).unwrap() + 1.0).abs() < 1e-15);
        let c = normalized_call(x, 0.3).unwrap();
        let back = m.inverse(m.forward(c).unwrap()).unwrap();
        assert!((back - c).abs() / c < 1e-12);
        // closed-form inverse of the inner map
        let s = (x - b.delta) * (x - b.delta);
        let inner = 2.0 / (1.0 + 2.0 * (p.c1.ln() - c.ln()) / s).sqrt() - 1.0;
        let closed = p.c1 * (-2.0 * s / ((inner + 1.0) * (inner + 1.0)) + 0.5 * s).exp();
        assert!((closed - c).abs() / c < 1e-12);
        assert!(m.forward(p.c1 * 1.1).is_err());
    }

    #[test]
    fn high_map_endpoints_and_inverse() {
        let b = BoundaryCurves::default();
        let x = -1.0;
        let p = b.boundary_prices(x).unwrap();
        let m = HighVolMap::new(x, p.c2, p.c_max).unwrap();
        assert_eq!(m.forward(p.c2).unwrap(), -1.0);
        assert!((m.forward(p.c_max).unwrap() - 1.0).abs() < 1e-15);
        let c = normalized_call(x, 4.0).unwrap();
        let back = m.inverse(m.forward(c).unwrap()).unwrap();
        assert!((back - c).abs() / c < 1e-12);
    }

    #[test]
    fn slopes_match_finite_differences() {
        let b = BoundaryCurves::default();
        for (area, x, v) in [(AreaId::I, -2.0, 0.4), (AreaId::II, -1.0, 1.2), (AreaId::III, -0.5, 4.0)] {
            let p = b.boundary_prices(x).unwrap();
            let map = PriceMap::for_area(&b, area, x, &p).unwrap();
            let c = normalized_call(x, v).unwrap();
            let h = 1e-6 * c;
            let fd = (map.apply(c + h) - map.apply(c - h)) / (2.0 * h);
            assert!((map.slope(c) - fd).abs() / fd.abs() < 1e-6, "{area}");
        }
    }

    #[test]
    fn area_labels_round_trip() {
        for a in AreaId::ALL {
            assert_eq!(a.label().parse::<AreaId>().unwrap(), a);
        }
        assert!("IV".parse::<AreaId>().is_err());
    }
}
