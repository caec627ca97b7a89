//! Accuracy studies: error decay of the single-rectangle surfaces and
//! round-trip validation of a built model on the standard test domains.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bs::normalized_call;
use crate::builder::{build_simple_surface, AccuracyPreset, SimpleSurface, SurfaceModel, SIMPLE_X_RANGE};
use crate::domain::AreaId;
use crate::engine::invert;
use crate::error::{Error, Result};
use crate::laplace::{build_laplace_surface, laplace_normalized_call, LAPLACE_V_RANGE, LAPLACE_X_RANGE};

/// Points per axis of the decay reference grid.
pub const DECAY_GRID: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub order: usize,
    pub max_err: f64,
    pub mean_err: f64,
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
}

fn summarize(order: usize, errors: &[f64]) -> DecayRow {
    DecayRow {
        order,
        max_err: errors.iter().fold(0.0f64, |m, e| m.max(*e)),
        mean_err: errors.iter().sum::<f64>() / errors.len().max(1) as f64,
    }
}

/// `(x, v, c)` reference points for the simple rectangle: equidistant `x`,
/// then equidistant `v` between the volatilities of the rectangle's edges.
pub fn simple_reference_grid(n: usize) -> Result<Vec<(f64, f64, f64)>> {
    let mut pts = Vec::with_capacity(n * n);
    for x in linspace(SIMPLE_X_RANGE.0, SIMPLE_X_RANGE.1, n) {
        let (lo, hi) = SimpleSurface::vol_bracket(x)?;
        for v in linspace(lo, hi, n) {
            pts.push((x, v, normalized_call(x, v)?));
        }
    }
    Ok(pts)
}

pub fn decay_simple(orders: &[usize]) -> Result<Vec<DecayRow>> {
    let grid = simple_reference_grid(DECAY_GRID)?;
    orders
        .iter()
        .map(|&n| {
            let s = build_simple_surface(n)?;
            let errors = grid
                .par_iter()
                .map(|&(x, v, c)| Ok((s.invert(x, c)? - v).abs()))
                .collect::<Result<Vec<f64>>>()?;
            Ok(summarize(n, &errors))
        })
        .collect()
}

pub fn decay_laplace(orders: &[usize]) -> Result<Vec<DecayRow>> {
    let mut grid = Vec::with_capacity(DECAY_GRID * DECAY_GRID);
    for x in linspace(LAPLACE_X_RANGE.0, LAPLACE_X_RANGE.1, DECAY_GRID) {
        for v in linspace(LAPLACE_V_RANGE.0, LAPLACE_V_RANGE.1, DECAY_GRID) {
            grid.push((x, v, laplace_normalized_call(x, v)?));
        }
    }
    orders
        .iter()
        .map(|&n| {
            let s = build_laplace_surface(n, 1e-15)?;
            let errors = grid
                .par_iter()
                .map(|&(x, v, c)| Ok((s.invert(x, c)? - v).abs()))
                .collect::<Result<Vec<f64>>>()?;
            Ok(summarize(n, &errors))
        })
        .collect()
}

/// True when the maximal errors strictly decrease with the order.
pub fn strictly_decreasing(rows: &[DecayRow]) -> bool {
    rows.windows(2).all(|w| w[1].max_err < w[0].max_err)
}

pub fn decay_csv(rows: &[DecayRow]) -> String {
    let mut out = String::from("N,max_err,mean_err\n");
    for r in rows {
        let _ = writeln!(out, "{},{:e},{:e}", r.order, r.max_err, r.mean_err);
    }
    out
}

/// Test domains for round-trip validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestDomain {
    /// `-0.5 <= x <= 0.5`, `max(|x|/2, v_min(-|x|)) <= v <= 1`
    D1,
    /// `-5 <= x <= 0`, `v_min(x) <= v <= 6`
    D2,
}

impl FromStr for TestDomain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "D1" | "d1" => Ok(TestDomain::D1),
            "D2" | "d2" => Ok(TestDomain::D2),
            other => Err(Error::argument(format!("unknown domain `{other}` (expected D1 or D2)"))),
        }
    }
}

impl fmt::Display for TestDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestDomain::D1 => "D1",
            TestDomain::D2 => "D2",
        })
    }
}

impl TestDomain {
    pub fn x_range(self) -> (f64, f64) {
        match self {
            TestDomain::D1 => (-0.5, 0.5),
            TestDomain::D2 => (-5.0, 0.0),
        }
    }

    pub fn v_range(self, model: &SurfaceModel, x: f64) -> (f64, f64) {
        let b = &model.curves;
        match self {
            TestDomain::D1 => {
                let a = x.abs();
                ((0.5 * a).max(b.v_min.0 - b.v_min.1 * a), 1.0)
            }
            TestDomain::D2 => (b.v_min.0 + b.v_min.1 * x, b.v_max),
        }
    }

    /// `n` equidistant moneyness values, each with `n` equidistant
    /// volatilities; with a seed, uniformly random points instead.
    pub fn points(self, model: &SurfaceModel, n: usize, seed: Option<u64>) -> Vec<(f64, f64)> {
        let (x0, x1) = self.x_range();
        match seed {
            None => linspace(x0, x1, n)
                .flat_map(|x| {
                    let (v0, v1) = self.v_range(model, x);
                    linspace(v0, v1, n).map(move |v| (x, v))
                })
                .collect(),
            Some(s) => {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                (0..n * n)
                    .map(|_| {
                        let x = rng.gen_range(x0..=x1);
                        let (v0, v1) = self.v_range(model, x);
                        (x, rng.gen_range(v0..=v1))
                    })
                    .collect()
            }
        }
    }
}

/// Round-trip errors with unit maturity, so `|dsigma| = |dv|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    pub domain: TestDomain,
    pub preset: AccuracyPreset,
    pub points: usize,
    /// Points the engine did not return a volatility for.
    pub failures: usize,
    pub max_dsigma: f64,
    pub mean_dsigma: f64,
    pub max_dc: f64,
    pub mean_dc: f64,
}

impl ValidationReport {
    pub fn csv(&self) -> String {
        format!(
            "domain,preset,points,failures,max_dsigma,mean_dsigma,max_dc,mean_dc\n{},{},{},{},{:e},{:e},{:e},{:e}\n",
            self.domain,
            self.preset,
            self.points,
            self.failures,
            self.max_dsigma,
            self.mean_dsigma,
            self.max_dc,
            self.mean_dc
        )
    }
}

pub fn validate(model: &SurfaceModel, n: usize, domain: TestDomain, seed: Option<u64>) -> Result<ValidationReport> {
    if n < 2 && seed.is_none() {
        return Err(Error::argument("grid size must be at least 2"));
    }
    let pts = domain.points(model, n, seed);
    let errs: Vec<Option<(f64, f64)>> = pts
        .par_iter()
        .map(|&(x, v)| {
            let c = normalized_call(x, v).ok()?;
            let v_hat = invert(model, x, c).v?;
            let c_hat = normalized_call(x, v_hat).ok()?;
            Some(((v_hat - v).abs(), (c_hat - c).abs()))
        })
        .collect();
    let ok: Vec<(f64, f64)> = errs.iter().flatten().copied().collect();
    let count = ok.len().max(1) as f64;
    Ok(ValidationReport {
        domain,
        preset: model.preset,
        points: pts.len(),
        failures: pts.len() - ok.len(),
        max_dsigma: ok.iter().fold(0.0f64, |m, e| m.max(e.0)),
        mean_dsigma: ok.iter().map(|e| e.0).sum::<f64>() / count,
        max_dc: ok.iter().fold(0.0f64, |m, e| m.max(e.1)),
        mean_dc: ok.iter().map(|e| e.1).sum::<f64>() / count,
    })
}

/// `n` seeded `(x, v, c)` quotes, uniform over the second test domain,
/// skipping prices that underflow.
pub fn synthetic_quotes(model: &SurfaceModel, n: usize, seed: u64) -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x0, x1) = TestDomain::D2.x_range();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = rng.gen_range(x0..=x1);
        let (v0, v1) = TestDomain::D2.v_range(model, x);
        let v = rng.gen_range(v0..=v1);
        match normalized_call(x, v) {
            Ok(c) if c >= f64::MIN_POSITIVE => out.push((x, v, c)),
            _ => {}
        }
    }
    out
}

/// Internal boundaries between neighbouring areas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Seam {
    /// The `c1` curve between the low-volatility areas and Area II.
    LowMedium,
    /// The `c2` curve between Areas II and III.
    MediumHigh,
    /// The vertical line `x = x_split` between Areas I and I'.
    Split,
}

impl Seam {
    pub const ALL: [Seam; 3] = [Seam::LowMedium, Seam::MediumHigh, Seam::Split];
}

impl fmt::Display for Seam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Seam::LowMedium => "c1",
            Seam::MediumHigh => "c2",
            Seam::Split => "x_split",
        })
    }
}

/// Largest disagreement of the two interpolants meeting at `seam`, over `n`
/// equidistant points along it.
pub fn seam_gap(model: &SurfaceModel, seam: Seam, n: usize) -> f64 {
    let curves = &model.curves;
    let eval = |area: AreaId, t_c: f64, x: f64| {
        let t_x = curves.x_map(area).apply(x).clamp(-1.0, 1.0);
        model.area(area).interp.eval_unit(t_c, t_x)
    };
    let gap = |a: f64, b: f64| (a - b).abs();
    match seam {
        Seam::LowMedium => linspace(curves.x_min, curves.x_max, n)
            .map(|x| gap(eval(curves.low_area(x), 1.0, x), eval(AreaId::II, -1.0, x)))
            .fold(0.0, f64::max),
        Seam::MediumHigh => linspace(curves.x_min, curves.x_max, n)
            .map(|x| gap(eval(AreaId::II, 1.0, x), eval(AreaId::III, -1.0, x)))
            .fold(0.0, f64::max),
        Seam::Split => {
            let x = curves.x_split;
            linspace(-1.0, 1.0, n)
                .map(|t| gap(eval(AreaId::I, t, x), eval(AreaId::IPrime, t, x)))
                .fold(0.0, f64::max)
        }
    }
}

/// Published per-area footprint `(rank, N1, N2)` the builds are compared to.
pub fn reference_footprint(preset: AccuracyPreset, area: AreaId) -> (usize, usize, usize) {
    use AccuracyPreset::*;
    use AreaId::*;
    match (preset, area) {
        (Low, I) => (10, 25, 36),
        (Low, IPrime) => (9, 27, 18),
        (Low, II) => (6, 21, 20),
        (Low, III) => (5, 11, 9),
        (Medium, I) => (16, 46, 79),
        (Medium, IPrime) => (16, 51, 39),
        (Medium, II) => (11, 36, 33),
        (Medium, III) => (7, 17, 14),
        (High, I) => (22, 67, 122),
        (High, IPrime) => (23, 77, 57),
        (High, II) => (14, 51, 47),
        (High, III) => (9, 23, 19),
    }
}

fn within_factor(got: usize, want: usize, factor: f64) -> bool {
    let (g, w) = (got as f64, want as f64);
    g <= factor * w && g * factor >= w
}

/// Whether every area's `(rank, N1, N2)` is within `factor` of the reference.
pub fn footprint_within(model: &SurfaceModel, factor: f64) -> bool {
    model.report().iter().all(|r| {
        let (k, n1, n2) = reference_footprint(model.preset, r.area);
        within_factor(r.rank, k, factor) && within_factor(r.n1, n1, factor) && within_factor(r.n2, n2, factor)
    })
}

/// Per-area rank and coefficient counts next to the reference footprint.
pub fn rank_table(model: &SurfaceModel) -> String {
    let mut out = format!("preset {} (tol {:e})\n", model.preset, model.tol());
    let _ = writeln!(
        out,
        "{:<5} {:>5} {:>5} {:>5}   {:>13}   reference k/N1/N2",
        "area", "k", "N1", "N2", "residual"
    );
    for r in model.report() {
        let (k, n1, n2) = reference_footprint(model.preset, r.area);
        let _ = writeln!(
            out,
            "{:<5} {:>5} {:>5} {:>5}   {:>13.3e}   {k}/{n1}/{n2}",
            r.area.label(),
            r.rank,
            r.n1,
            r.n2,
            r.residual
        );
    }
    out
}
