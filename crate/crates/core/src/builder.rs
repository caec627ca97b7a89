//! Offline phase: boundary-price interpolants, per-area low-rank surfaces of
//! the implied volatility and the single-rectangle reference surface.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::bs::otm_call;
use crate::cheb::{lowrank_fit_2d, lowrank_fit_fixed, Cheb1D, LowRank2D, LowRankOptions, SliceBank};
use crate::domain::{AreaId, BoundaryCurves, BoundaryPrices, PriceMap};
use crate::error::{Error, Result};
use crate::oracle::implied_vol_oracle;

/// Node values are solved this much tighter than the interpolation target.
pub const ORACLE_TOL_FACTOR: f64 = 1e-2;

/// Relative accuracy demanded of the boundary-price interpolants.
pub const BOUNDARY_REL_TOL: f64 = 1e-12;
pub const BOUNDARY_MIN_ORDER: usize = 16;
pub const BOUNDARY_MAX_ORDER: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccuracyPreset {
    Low,
    Medium,
    High,
}

impl AccuracyPreset {
    pub const ALL: [AccuracyPreset; 3] = [AccuracyPreset::Low, AccuracyPreset::Medium, AccuracyPreset::High];

    pub fn tol(self) -> f64 {
        match self {
            AccuracyPreset::Low => 1e-6,
            AccuracyPreset::Medium => 1e-9,
            AccuracyPreset::High => 1e-12,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AccuracyPreset::Low => "low",
            AccuracyPreset::Medium => "medium",
            AccuracyPreset::High => "high",
        }
    }

    pub fn oracle_tol(self) -> f64 {
        self.tol() * ORACLE_TOL_FACTOR
    }
}

impl fmt::Display for AccuracyPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AccuracyPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(AccuracyPreset::Low),
            "medium" => Ok(AccuracyPreset::Medium),
            "high" => Ok(AccuracyPreset::High),
            other => Err(Error::argument(format!(
                "unknown preset `{other}` (expected low, medium or high)"
            ))),
        }
    }
}

/// Interpolants of `c(x, v1(x))`, `c(x, v2(x))` and `c(x, v_max)` over the
/// moneyness range. The lowest boundary price is always priced directly.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryInterps {
    pub c1: Cheb1D,
    pub c2: Cheb1D,
    pub c_max: Cheb1D,
    // c_max, c2, c1
    bank: SliceBank,
}

impl BoundaryInterps {
    pub fn new(c1: Cheb1D, c2: Cheb1D, c_max: Cheb1D) -> Result<Self> {
        let interval = c_max.interval();
        if c1.interval() != interval || c2.interval() != interval {
            return Err(Error::argument("boundary interpolants must share one interval"));
        }
        let bank = SliceBank::new(&[c_max.clone(), c2.clone(), c1.clone()], None);
        Ok(BoundaryInterps { c1, c2, c_max, bank })
    }

    /// `(c_max, c2, c1)` at `x`, evaluated jointly.
    pub fn upper(&self, x: f64) -> Result<(f64, f64, f64)> {
        let (lo, hi) = self.c_max.interval();
        let s = (2.0 * x - (lo + hi)) / (hi - lo);
        if s.is_nan() || s.abs() > 1.0 + crate::cheb::CLAMP_TOL {
            return Err(Error::domain(format!("{x} outside boundary interval [{lo}, {hi}]")));
        }
        let mut out = [0.0; 8];
        self.bank.eval_unit_into(s.clamp(-1.0, 1.0), &mut out);
        Ok((out[0], out[1], out[2]))
    }

    /// Boundary prices at `x`: interpolated except for `c_min`.
    pub fn prices(&self, curves: &BoundaryCurves, x: f64) -> Result<BoundaryPrices> {
        Ok(BoundaryPrices {
            c_min: curves.c_min(x),
            c1: self.c1.eval(x)?,
            c2: self.c2.eval(x)?,
            c_max: self.c_max.eval(x)?,
        })
    }
}

fn fit_boundary(curves: &BoundaryCurves, v_of_x: impl Fn(f64) -> f64, order: usize) -> Result<Cheb1D> {
    let (lo, hi) = (curves.x_min, curves.x_max);
    let mut n = order;
    loop {
        let interp = Cheb1D::fit_fn(|x| otm_call(x, v_of_x(x)), n, lo, hi)?;
        let mut worst = 0.0f64;
        for k in 0..500 {
            let x = lo + (hi - lo) * k as f64 / 499.0;
            let exact = otm_call(x, v_of_x(x));
            worst = worst.max(((interp.eval(x)? - exact) / exact).abs());
        }
        if worst <= BOUNDARY_REL_TOL {
            return Ok(interp);
        }
        if n * 2 > BOUNDARY_MAX_ORDER {
            return Err(Error::FitFailure {
                rank: 1,
                order: n,
                residual: worst,
                tol: BOUNDARY_REL_TOL,
            });
        }
        n *= 2;
    }
}

/// Fits the three interpolated boundary prices, starting at `order` and
/// doubling until the relative error at 500 points is within tolerance.
pub fn build_boundary_interps(curves: &BoundaryCurves, order: usize) -> Result<BoundaryInterps> {
    if order < BOUNDARY_MIN_ORDER {
        return Err(Error::argument(format!(
            "boundary order must be at least {BOUNDARY_MIN_ORDER}, got {order}"
        )));
    }
    let b = *curves;
    let wrap = |what: &str, r: Result<Cheb1D>| {
        r.map_err(|e| Error::Build {
            what: format!("boundary {what}"),
            source: Box::new(e),
        })
    };
    BoundaryInterps::new(
        wrap("c1", fit_boundary(curves, move |x| b.v1.0 + b.v1.1 * x, order))?,
        wrap("c2", fit_boundary(curves, move |x| b.v2.0 + b.v2.1 * x, order))?,
        wrap("c_max", fit_boundary(curves, move |_| b.v_max, order))?,
    )
}

/// One area's interpolant in scaled coordinates: first variable the scaled
/// price, second the scaled moneyness.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaSurface {
    pub area: AreaId,
    pub interp: LowRank2D,
    /// Max error over the construction grid.
    pub residual: f64,
    pub grid_order: usize,
    pub evaluations: usize,
}

impl AreaSurface {
    pub fn rank(&self) -> usize {
        self.interp.rank()
    }

    /// `(price-direction, moneyness-direction)` coefficient counts.
    pub fn orders(&self) -> (usize, usize) {
        self.interp.orders()
    }
}

/// Implied volatility at scaled coordinates of `area`, solved by the oracle.
pub fn area_target(
    curves: &BoundaryCurves,
    bounds: &BoundaryInterps,
    area: AreaId,
    t_c: f64,
    t_x: f64,
    oracle_tol: f64,
) -> Result<f64> {
    let x = curves.x_map(area).invert(t_x);
    let prices = bounds.prices(curves, x)?;
    let map = PriceMap::for_area(curves, area, x, &prices)?;
    let c = map.invert(t_c);
    Ok(implied_vol_oracle(x, c, oracle_tol)?.v)
}

pub fn build_area(
    curves: &BoundaryCurves,
    bounds: &BoundaryInterps,
    area: AreaId,
    preset: AccuracyPreset,
) -> Result<AreaSurface> {
    let oracle_tol = preset.oracle_tol();
    let f = |t_c: f64, t_x: f64| area_target(curves, bounds, area, t_c, t_x, oracle_tol);
    let fit = lowrank_fit_2d(f, (-1.0, 1.0), (-1.0, 1.0), &LowRankOptions::new(preset.tol())).map_err(|e| {
        Error::Build {
            what: format!("area {area} ({preset})"),
            source: Box::new(e),
        }
    })?;
    Ok(AreaSurface {
        area,
        interp: fit.model,
        residual: fit.residual,
        grid_order: fit.grid_order,
        evaluations: fit.evaluations,
    })
}

/// Max error of an area interpolant against the oracle on an `n x n` grid of
/// cell midpoints in scaled coordinates (none of which are nodes).
pub fn out_of_sample_residual(
    curves: &BoundaryCurves,
    bounds: &BoundaryInterps,
    surface: &AreaSurface,
    n: usize,
) -> Result<f64> {
    let tol = 1e-15;
    let mut worst = 0.0f64;
    for i in 0..n {
        let t_c = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
        for j in 0..n {
            let t_x = -1.0 + 2.0 * (j as f64 + 0.5) / n as f64;
            let exact = area_target(curves, bounds, surface.area, t_c, t_x, tol)?;
            worst = worst.max((surface.interp.eval_unit(t_c, t_x) - exact).abs());
        }
    }
    Ok(worst)
}

/// The complete implied-volatility approximator.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceModel {
    pub preset: AccuracyPreset,
    pub curves: BoundaryCurves,
    pub bounds: BoundaryInterps,
    /// Indexed like [`AreaId::ALL`].
    pub areas: Vec<AreaSurface>,
    pub oracle_tol: f64,
}

impl SurfaceModel {
    pub fn tol(&self) -> f64 {
        self.preset.tol()
    }

    pub fn area(&self, id: AreaId) -> &AreaSurface {
        &self.areas[id as usize]
    }

    /// Checks that all four areas are present, in order, and within tolerance.
    pub fn validate(&self) -> Result<()> {
        if self.areas.len() != 4 {
            return Err(Error::argument(format!("model has {} areas, expected 4", self.areas.len())));
        }
        for (surface, id) in self.areas.iter().zip(AreaId::ALL) {
            if surface.area != id {
                return Err(Error::argument(format!("area {} stored in slot of {id}", surface.area)));
            }
            if !(surface.residual <= self.tol()) {
                return Err(Error::argument(format!(
                    "area {id} residual {:e} exceeds tolerance {:e}",
                    surface.residual,
                    self.tol()
                )));
            }
        }
        Ok(())
    }

    pub fn report(&self) -> Vec<AreaReport> {
        self.areas
            .iter()
            .map(|s| {
                let (n1, n2) = s.orders();
                AreaReport {
                    area: s.area,
                    rank: s.rank(),
                    n1,
                    n2,
                    residual: s.residual,
                    grid_order: s.grid_order,
                    evaluations: s.evaluations,
                }
            })
            .collect()
    }
}

/// Size and accuracy summary of one built area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaReport {
    pub area: AreaId,
    pub rank: usize,
    pub n1: usize,
    pub n2: usize,
    pub residual: f64,
    pub grid_order: usize,
    pub evaluations: usize,
}

/// Builds all four areas (in parallel) with the default geometry and `delta`.
pub fn build_surface(preset: AccuracyPreset) -> Result<SurfaceModel> {
    build_surface_with(preset, BoundaryCurves::default())
}

pub fn build_surface_with(preset: AccuracyPreset, curves: BoundaryCurves) -> Result<SurfaceModel> {
    let bounds = build_boundary_interps(&curves, BOUNDARY_MIN_ORDER)?;
    let areas = AreaId::ALL
        .par_iter()
        .map(|&a| build_area(&curves, &bounds, a, preset))
        .collect::<Result<Vec<_>>>()?;
    let model = SurfaceModel {
        preset,
        curves,
        bounds,
        areas,
        oracle_tol: preset.oracle_tol(),
    };
    model.validate()?;
    Ok(model)
}

/// Rank of Area I' at the high preset for each candidate `delta`.
pub fn delta_sweep(deltas: &[f64]) -> Result<Vec<(f64, usize)>> {
    deltas
        .par_iter()
        .map(|&d| {
            let curves = BoundaryCurves::with_delta(d)?;
            let bounds = build_boundary_interps(&curves, BOUNDARY_MIN_ORDER)?;
            let s = build_area(&curves, &bounds, AreaId::IPrime, AccuracyPreset::High)?;
            Ok((d, s.rank()))
        })
        .collect()
}

pub const SIMPLE_X_RANGE: (f64, f64) = (-5.0, 0.0);
pub const SIMPLE_XI_RANGE: (f64, f64) = (0.05, 0.8);

/// Single-rectangle interpolant over `(xi, x)` with `c = xi e^{x/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleSurface {
    pub interp: LowRank2D,
    pub order: usize,
    pub residual: f64,
}

impl SimpleSurface {
    pub fn invert(&self, x: f64, c: f64) -> Result<f64> {
        let xi = c * (-0.5 * x).exp();
        self.interp.eval(xi, x)
    }

    /// Volatility bracket covered at `x`.
    pub fn vol_bracket(x: f64) -> Result<(f64, f64)> {
        let cap = (0.5 * x).exp();
        let lo = implied_vol_oracle(x, SIMPLE_XI_RANGE.0 * cap, 1e-15)?.v;
        let hi = implied_vol_oracle(x, SIMPLE_XI_RANGE.1 * cap, 1e-15)?.v;
        Ok((lo, hi))
    }
}

pub fn build_simple_surface(order: usize) -> Result<SimpleSurface> {
    if order < 5 {
        return Err(Error::argument(format!("order must be at least 5, got {order}")));
    }
    let f = |xi: f64, x: f64| Ok(implied_vol_oracle(x, xi * (0.5 * x).exp(), 1e-15)?.v);
    let fit = lowrank_fit_fixed(f, order, SIMPLE_XI_RANGE, SIMPLE_X_RANGE, 1e-15)?;
    Ok(SimpleSurface {
        interp: fit.model,
        order,
        residual: fit.residual,
    })
}
