//! Chebyshev interpolation in one and two variables.
//!
//! Univariate interpolants live on Chebyshev points of the second kind,
//! `cos(k pi / N)`, affinely mapped to a source interval. Bivariate functions
//! are represented either as a full tensor of coefficients or in low-rank
//! skeleton form `sum_j d_j c_j(y) r_j(x)`, built by Gaussian elimination
//! with complete pivoting on nested Chebyshev grids.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Slack allowed beyond an interval endpoint before evaluation is rejected.
pub const CLAMP_TOL: f64 = 1e-12;

/// The `N + 1` Chebyshev points `cos(k pi / N)`, descending from 1 to -1.
pub fn cheb_nodes(order: usize) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(Error::argument("Chebyshev order must be at least 1"));
    }
    Ok(unit_nodes(order))
}

fn unit_nodes(order: usize) -> Vec<f64> {
    // sin form keeps the points exactly symmetric about zero
    let n = order as f64;
    (0..=order)
        .map(|k| (PI * (n - 2.0 * k as f64) / (2.0 * n)).sin())
        .collect()
}

/// Chebyshev coefficients of the interpolant through `values` sampled at
/// [`cheb_nodes`] (first and last summand halved).
fn interp_coeffs(values: &[f64]) -> Vec<f64> {
    let n = values.len() - 1;
    if n == 0 {
        return vec![values[0]];
    }
    let two_n = 2 * n;
    // cos(m pi / N) = sin(pi/2 - m pi / N) for m in 0..2N
    let table: Vec<f64> = (0..two_n)
        .map(|m| (PI * (n as f64 - 2.0 * m as f64) / (2.0 * n as f64)).sin())
        .collect();
    (0..=n)
        .map(|j| {
            let mut acc = 0.0;
            for (k, &f) in values.iter().enumerate() {
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                acc += w * f * table[(j * k) % two_n];
            }
            let scale = if j == 0 || j == n { 1.0 } else { 2.0 };
            acc * scale / n as f64
        })
        .collect()
}

#[inline]
fn to_unit(t: f64, lo: f64, hi: f64) -> f64 {
    (2.0 * t - (lo + hi)) / (hi - lo)
}

#[inline]
fn from_unit(s: f64, lo: f64, hi: f64) -> f64 {
    0.5 * (lo + hi) + 0.5 * (hi - lo) * s
}

/// Sum of `coeffs[j] T_j(s)` by the forward three-term recurrence.
#[inline]
fn recurrence_sum(coeffs: &[f64], s: f64) -> f64 {
    let mut acc = coeffs[0];
    if coeffs.len() == 1 {
        return acc;
    }
    let (mut t_prev, mut t_cur) = (1.0, s);
    acc += coeffs[1] * s;
    let two_s = 2.0 * s;
    for &a in &coeffs[2..] {
        let t_next = two_s * t_cur - t_prev;
        acc += a * t_next;
        t_prev = t_cur;
        t_cur = t_next;
    }
    acc
}

/// Basis values kept on the stack; longer expansions use the heap.
const STACK_BASIS: usize = 272;

/// Fills `out[j] = T_j(s)`. Past the first block the recurrence steps by
/// `B` indices, `T_k = 2 T_B T_{k-B} - T_{k-2B}`, so `B` chains run
/// independently.
pub fn cheb_basis(s: f64, out: &mut [f64]) {
    const B: usize = 8;
    let n = out.len();
    if n == 0 {
        return;
    }
    out[0] = 1.0;
    if n == 1 {
        return;
    }
    out[1] = s;
    let two_s = 2.0 * s;
    for k in 2..n.min(2 * B) {
        out[k] = two_s * out[k - 1] - out[k - 2];
    }
    if n > 2 * B {
        let m = 2.0 * out[B];
        let mut older: [f64; B] = out[..B].try_into().expect("block");
        let mut newer: [f64; B] = out[B..2 * B].try_into().expect("block");
        let mut chunks = out[2 * B..].chunks_exact_mut(B);
        for chunk in &mut chunks {
            for l in 0..B {
                chunk[l] = m * newer[l] - older[l];
            }
            older = newer;
            newer = (&*chunk).try_into().expect("block");
        }
        for (l, t) in chunks.into_remainder().iter_mut().enumerate() {
            *t = m * newer[l] - older[l];
        }
    }
}

/// Runs `f` on the first `n` basis values at `s`.
#[inline]
pub fn with_basis<R>(s: f64, n: usize, f: impl FnOnce(&[f64]) -> R) -> R {
    // sized tiers keep the zero-fill short for the common low orders
    fn run<const N: usize, R>(s: f64, n: usize, f: impl FnOnce(&[f64]) -> R) -> R {
        let mut buf = [0.0; N];
        cheb_basis(s, &mut buf[..n]);
        f(&buf[..n])
    }
    match n {
        0..=32 => run::<32, R>(s, n, f),
        33..=64 => run::<64, R>(s, n, f),
        65..=128 => run::<128, R>(s, n, f),
        129..=STACK_BASIS => run::<STACK_BASIS, R>(s, n, f),
        _ => {
            let mut buf = vec![0.0; n];
            cheb_basis(s, &mut buf);
            f(&buf)
        }
    }
}

/// `sum a[j] b[j]` over the shorter length, four lanes at a time.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut lanes = [0.0; 4];
    let (ac, bc) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ac.remainder().iter().zip(bc.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ac.zip(bc) {
        for l in 0..4 {
            lanes[l] += x[l] * y[l];
        }
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

/// Value and `d/ds` of `sum coeffs[j] T_j(s)`.
fn recurrence_sum_with_derivative(coeffs: &[f64], s: f64) -> (f64, f64) {
    let mut value = coeffs[0];
    let mut slope = 0.0;
    if coeffs.len() == 1 {
        return (value, slope);
    }
    let (mut t_prev, mut t_cur) = (1.0, s);
    let (mut d_prev, mut d_cur) = (0.0, 1.0);
    value += coeffs[1] * s;
    slope += coeffs[1];
    for &a in &coeffs[2..] {
        let t_next = 2.0 * s * t_cur - t_prev;
        let d_next = 2.0 * t_cur + 2.0 * s * d_cur - d_prev;
        value += a * t_next;
        slope += a * d_next;
        t_prev = t_cur;
        t_cur = t_next;
        d_prev = d_cur;
        d_cur = d_next;
    }
    (value, slope)
}

/// Univariate Chebyshev interpolant on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cheb1D {
    coeffs: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl Cheb1D {
    pub fn new(coeffs: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::argument("coefficient sequence is empty"));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::argument(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Cheb1D { coeffs, lo, hi })
    }

    /// Interpolant through `values` taken at the mapped Chebyshev points of
    /// order `values.len() - 1`, in the order returned by [`Cheb1D::nodes`].
    pub fn fit(values: &[f64], lo: f64, hi: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::argument("no values to fit"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::argument(format!("non-finite sample {v}")));
        }
        Cheb1D::new(interp_coeffs(values), lo, hi)
    }

    /// Samples `f` at the order-`order` points of `[lo, hi]` and fits.
    pub fn fit_fn(f: impl Fn(f64) -> f64, order: usize, lo: f64, hi: f64) -> Result<Self> {
        let values: Vec<f64> = Cheb1D::nodes(order, lo, hi)?.into_iter().map(f).collect();
        Cheb1D::fit(&values, lo, hi)
    }

    /// Chebyshev points of order `order` mapped to `[lo, hi]`.
    pub fn nodes(order: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
        Ok(cheb_nodes(order)?
            .into_iter()
            .map(|s| from_unit(s, lo, hi))
            .collect())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Number of coefficients (degree + 1).
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn unit_arg(&self, t: f64) -> Result<f64> {
        let s = to_unit(t, self.lo, self.hi);
        if s.is_nan() || s.abs() > 1.0 + CLAMP_TOL {
            return Err(Error::domain(format!(
                "{t} outside interpolation interval [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(s.clamp(-1.0, 1.0))
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        Ok(recurrence_sum(&self.coeffs, self.unit_arg(t)?))
    }

    /// Evaluates at a point already expressed in `[-1, 1]`.
    #[inline]
    pub fn eval_unit(&self, s: f64) -> f64 {
        recurrence_sum(&self.coeffs, s)
    }

    /// Evaluation against precomputed basis values (see [`cheb_basis`]);
    /// `basis` must hold at least [`Cheb1D::len`] entries.
    #[inline]
    pub fn eval_basis(&self, basis: &[f64]) -> f64 {
        debug_assert!(basis.len() >= self.coeffs.len());
        dot(&self.coeffs, basis)
    }

    /// Value and derivative with respect to the source variable.
    pub fn eval_with_derivative(&self, t: f64) -> Result<(f64, f64)> {
        let (v, d) = recurrence_sum_with_derivative(&self.coeffs, self.unit_arg(t)?);
        Ok((v, d * 2.0 / (self.hi - self.lo)))
    }

    /// Drops trailing coefficients while their accumulated magnitude stays
    /// at or below `budget`. At least one coefficient is kept.
    pub fn truncate(&mut self, budget: f64) {
        let mut dropped = 0.0;
        while self.coeffs.len() > 1 {
            let last = self.coeffs[self.coeffs.len() - 1].abs();
            if dropped + last > budget {
                break;
            }
            dropped += last;
            self.coeffs.pop();
        }
    }
}

/// Tensor-product interpolant `sum_ij a_ij T_i(x) T_j(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2D {
    /// Row-major `(n1 + 1) x (n2 + 1)` coefficients, `a[i][j]`.
    coeffs: Vec<f64>,
    n1: usize,
    n2: usize,
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Tensor2D {
    /// `samples[i][j] = f(x_i, y_j)` on the Chebyshev grid of orders
    /// `(samples.len() - 1, samples[0].len() - 1)`.
    pub fn fit(samples: &[Vec<f64>], x_range: (f64, f64), y_range: (f64, f64)) -> Result<Self> {
        let rows = samples.len();
        let cols = samples.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 || samples.iter().any(|r| r.len() != cols) {
            return Err(Error::argument("sample matrix must be rectangular and non-empty"));
        }
        if !(x_range.0 < x_range.1 && y_range.0 < y_range.1) {
            return Err(Error::argument("degenerate tensor rectangle"));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::argument("non-finite sample"));
        }
        // transform along y for every x node, then along x
        let along_y: Vec<Vec<f64>> = samples.iter().map(|r| interp_coeffs(r)).collect();
        let mut coeffs = vec![0.0; rows * cols];
        for j in 0..cols {
            let column: Vec<f64> = along_y.iter().map(|r| r[j]).collect();
            for (i, a) in interp_coeffs(&column).into_iter().enumerate() {
                coeffs[i * cols + j] = a;
            }
        }
        Ok(Tensor2D {
            coeffs,
            n1: rows - 1,
            n2: cols - 1,
            x_range,
            y_range,
        })
    }

    pub fn fit_fn(
        f: impl Fn(f64, f64) -> f64,
        orders: (usize, usize),
        x_range: (f64, f64),
        y_range: (f64, f64),
    ) -> Result<Self> {
        let xs = Cheb1D::nodes(orders.0, x_range.0, x_range.1)?;
        let ys = Cheb1D::nodes(orders.1, y_range.0, y_range.1)?;
        let samples: Vec<Vec<f64>> = xs
            .iter()
            .map(|&x| ys.iter().map(|&y| f(x, y)).collect())
            .collect();
        Tensor2D::fit(&samples, x_range, y_range)
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        self.coeffs[i * (self.n2 + 1) + j]
    }

    pub fn orders(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let sx = to_unit(x, self.x_range.0, self.x_range.1);
        let sy = to_unit(y, self.y_range.0, self.y_range.1);
        if sx.abs() > 1.0 + CLAMP_TOL || sy.abs() > 1.0 + CLAMP_TOL || sx.is_nan() || sy.is_nan() {
            return Err(Error::domain(format!("({x}, {y}) outside tensor rectangle")));
        }
        let (sx, sy) = (sx.clamp(-1.0, 1.0), sy.clamp(-1.0, 1.0));
        let inner: Vec<f64> = self
            .coeffs
            .chunks(self.n2 + 1)
            .map(|row| recurrence_sum(row, sy))
            .collect();
        Ok(recurrence_sum(&inner, sx))
    }
}

/// Rank-k skeleton `f(x, y) ~ sum_j d_j c_j(y) r_j(x)`.
///
/// `rows[j]` is a function of the first variable, `cols[j]` of the second.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRank2D {
    weights: Vec<f64>,
    rows: Vec<Cheb1D>,
    cols: Vec<Cheb1D>,
    // evaluation copies; rows carry the weights
    row_bank: SliceBank,
    col_bank: SliceBank,
}

const LANES: usize = 8;

/// Interpolants sharing one interval, stored for joint evaluation in blocks
/// of eight: entry `(b * n + i) * 8 + l` is coefficient `i` of slice
/// `8 b + l`, zero padded.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceBank {
    packed: Vec<f64>,
    n: usize,
    k: usize,
}

impl SliceBank {
    /// Packs `slices`, each multiplied by `scale[j]` when given.
    pub fn new(slices: &[Cheb1D], scale: Option<&[f64]>) -> Self {
        let n = slices.iter().map(Cheb1D::len).max().unwrap_or(0);
        let blocks = slices.len().div_ceil(LANES);
        let mut packed = vec![0.0; blocks * n * LANES];
        for (j, p) in slices.iter().enumerate() {
            let (b, l) = (j / LANES, j % LANES);
            let w = scale.map_or(1.0, |d| d[j]);
            for (i, a) in p.coeffs().iter().enumerate() {
                packed[(b * n + i) * LANES + l] = w * a;
            }
        }
        SliceBank {
            packed,
            n,
            k: slices.len(),
        }
    }

    /// Longest coefficient count.
    pub fn order(&self) -> usize {
        self.n
    }

    /// Slice count rounded up to whole blocks; the length `eval_unit_into`
    /// writes.
    pub fn padded(&self) -> usize {
        self.k.div_ceil(LANES) * LANES
    }

    /// All slice values at `s` in `[-1, 1]`; padding slots receive zero.
    #[inline]
    pub fn eval_unit_into(&self, s: f64, out: &mut [f64]) {
        let out = &mut out[..self.padded()];
        if self.n == 0 {
            out.fill(0.0);
            return;
        }
        with_basis(s, self.n, |b| block_sums(&self.packed, b, out));
    }
}

/// Slice values `out[j] = sum_i basis[i] coeff_i(slice j)` from a packed
/// layout; `out` holds a whole number of blocks.
#[inline]
fn block_sums(packed: &[f64], basis: &[f64], out: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
        // SAFETY: both target features were detected at run time
        return unsafe { block_sums_fma(packed, basis, out) };
    }
    block_sums_with::<false>(packed, basis, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
fn block_sums_fma(packed: &[f64], basis: &[f64], out: &mut [f64]) {
    block_sums_with::<true>(packed, basis, out)
}

#[inline(always)]
fn block_sums_with<const FUSED: bool>(packed: &[f64], basis: &[f64], out: &mut [f64]) {
    let n = basis.len();
    let step = |acc: &mut [f64; LANES], row: &[f64], t: f64| {
        for l in 0..LANES {
            acc[l] = if FUSED { row[l].mul_add(t, acc[l]) } else { acc[l] + row[l] * t };
        }
    };
    for (chunk, dst) in packed.chunks_exact(n * LANES).zip(out.chunks_exact_mut(LANES)) {
        // two accumulator sets halve the dependency chain
        let (mut even, mut odd) = ([0.0; LANES], [0.0; LANES]);
        let pairs = chunk.chunks_exact(2 * LANES);
        let last = pairs.remainder();
        for (t, rows) in basis.chunks_exact(2).zip(pairs) {
            step(&mut even, &rows[..LANES], t[0]);
            step(&mut odd, &rows[LANES..], t[1]);
        }
        if !last.is_empty() {
            step(&mut even, last, basis[n - 1]);
        }
        for l in 0..LANES {
            dst[l] = even[l] + odd[l];
        }
    }
}

impl LowRank2D {
    pub fn new(weights: Vec<f64>, rows: Vec<Cheb1D>, cols: Vec<Cheb1D>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::argument("rank must be at least 1"));
        }
        if weights.len() != rows.len() || weights.len() != cols.len() {
            return Err(Error::argument(format!(
                "rank mismatch: {} weights, {} rows, {} columns",
                weights.len(),
                rows.len(),
                cols.len()
            )));
        }
        let first = (rows[0].interval(), cols[0].interval());
        if rows.iter().any(|r| r.interval() != first.0) || cols.iter().any(|c| c.interval() != first.1) {
            return Err(Error::argument("all slices must share the rectangle"));
        }
        let row_bank = SliceBank::new(&rows, Some(&weights));
        let col_bank = SliceBank::new(&cols, None);
        Ok(LowRank2D {
            weights,
            rows,
            cols,
            row_bank,
            col_bank,
        })
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rows(&self) -> &[Cheb1D] {
        &self.rows
    }

    pub fn cols(&self) -> &[Cheb1D] {
        &self.cols
    }

    /// Largest number of coefficients over the row (first-variable) slices
    /// and over the column (second-variable) slices.
    pub fn orders(&self) -> (usize, usize) {
        (self.row_bank.order(), self.col_bank.order())
    }

    pub fn x_range(&self) -> (f64, f64) {
        self.rows[0].interval()
    }

    pub fn y_range(&self) -> (f64, f64) {
        self.cols[0].interval()
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let (x0, x1) = self.x_range();
        let (y0, y1) = self.y_range();
        let sx = to_unit(x, x0, x1);
        let sy = to_unit(y, y0, y1);
        if sx.is_nan() || sy.is_nan() || sx.abs() > 1.0 + CLAMP_TOL || sy.abs() > 1.0 + CLAMP_TOL {
            return Err(Error::domain(format!(
                "({x}, {y}) outside [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        Ok(self.eval_unit(sx.clamp(-1.0, 1.0), sy.clamp(-1.0, 1.0)))
    }

    /// Evaluation at coordinates already scaled to `[-1, 1]^2`.
    #[inline]
    pub fn eval_unit(&self, sx: f64, sy: f64) -> f64 {
        let padded = self.weights.len().div_ceil(LANES) * LANES;
        match padded {
            8 => self.eval_stack::<8>(sx, sy),
            16 => self.eval_stack::<16>(sx, sy),
            24 | 32 => self.eval_stack::<32>(sx, sy),
            40..=64 => self.eval_stack::<64>(sx, sy),
            _ => {
                let (mut r, mut c) = (vec![0.0; padded], vec![0.0; padded]);
                self.eval_into(sx, sy, &mut r, &mut c)
            }
        }
    }

    #[inline]
    fn eval_stack<const K: usize>(&self, sx: f64, sy: f64) -> f64 {
        let padded = self.weights.len().div_ceil(LANES) * LANES;
        let (mut r, mut c) = ([0.0; K], [0.0; K]);
        self.eval_into(sx, sy, &mut r[..padded], &mut c[..padded])
    }

    #[inline]
    fn eval_into(&self, sx: f64, sy: f64, r: &mut [f64], c: &mut [f64]) -> f64 {
        self.row_bank.eval_unit_into(sx, r);
        self.col_bank.eval_unit_into(sy, c);
        dot(r, c)
    }

    /// Value and partial derivative with respect to the first variable
    /// (in unit coordinates).
    pub fn eval_unit_with_dx(&self, sx: f64, sy: f64) -> (f64, f64) {
        let mut value = 0.0;
        let mut slope = 0.0;
        for ((d, r), c) in self.weights.iter().zip(&self.rows).zip(&self.cols) {
            let (rv, rd) = recurrence_sum_with_derivative(r.coeffs(), sx);
            let cv = c.eval_unit(sy);
            value += d * rv * cv;
            slope += d * rd * cv;
        }
        (value, slope)
    }
}

/// Controls for [`lowrank_fit_2d`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowRankOptions {
    /// Absolute accuracy target.
    pub tol: f64,
    pub max_rank: usize,
    /// Finest grid order tried; grids double from [`LowRankOptions::min_order`].
    pub max_order: usize,
    pub min_order: usize,
}

impl LowRankOptions {
    pub fn new(tol: f64) -> Self {
        LowRankOptions {
            tol,
            max_rank: 64,
            max_order: 256,
            min_order: 16,
        }
    }
}

/// Outcome of an adaptive low-rank construction.
#[derive(Debug, Clone)]
pub struct LowRankFit {
    pub model: LowRank2D,
    /// Max error of the final (truncated) model over the construction grid.
    pub residual: f64,
    /// Order of the finest grid that was sampled.
    pub grid_order: usize,
    pub evaluations: usize,
}

// Stop eliminating once the largest remaining residual is below this
// fraction of the target.
const PIVOT_FRACTION: f64 = 0.25;
// Per-slice budgets for dropped coefficients, relative to the target, tried
// from the most aggressive down.
const TRUNCATION_FRACTIONS: [f64; 6] = [0.5, 0.2, 0.1, 0.05, 0.02, 0.01];
// A trimmed model is accepted when its grid residual stays below this
// fraction of the target.
const TRIMMED_FRACTION: f64 = 0.5;
// A slice counts as resolved when its trailing quarter of coefficients,
// scaled by the term magnitude, is below this fraction of the target.
const RESOLUTION_FRACTION: f64 = 1e-1;

/// Samples of `f` on a square Chebyshev grid, `values[i * (n + 1) + j]`.
struct Grid {
    order: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
    values: Vec<f64>,
}

impl Grid {
    fn sample<F>(
        f: &F,
        order: usize,
        x_range: (f64, f64),
        y_range: (f64, f64),
        coarse: Option<&Grid>,
        evaluations: &mut usize,
    ) -> Result<Grid>
    where
        F: Fn(f64, f64) -> Result<f64>,
    {
        let xs = Cheb1D::nodes(order, x_range.0, x_range.1)?;
        let ys = Cheb1D::nodes(order, y_range.0, y_range.1)?;
        let m = order + 1;
        let mut values = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                // nodes of order n are the even-indexed nodes of order 2n
                let reused = coarse.and_then(|g| {
                    (g.order * 2 == order && i % 2 == 0 && j % 2 == 0)
                        .then(|| g.values[(i / 2) * (g.order + 1) + j / 2])
                });
                values[i * m + j] = match reused {
                    Some(v) => v,
                    None => {
                        *evaluations += 1;
                        let v = f(xs[i], ys[j])?;
                        if !v.is_finite() {
                            return Err(Error::domain(format!(
                                "non-finite sample at ({}, {})",
                                xs[i], ys[j]
                            )));
                        }
                        v
                    }
                };
            }
        }
        Ok(Grid {
            order,
            xs,
            ys,
            values,
        })
    }
}

/// Pivots and residual slices from Gaussian elimination with complete
/// pivoting on a sampled grid.
struct Elimination {
    weights: Vec<f64>,
    /// Residual column at each pivot: a vector over the first variable.
    x_slices: Vec<Vec<f64>>,
    /// Residual row at each pivot: a vector over the second variable.
    y_slices: Vec<Vec<f64>>,
    converged: bool,
}

fn eliminate(grid: &Grid, pivot_tol: f64, max_rank: usize) -> Elimination {
    let m = grid.order + 1;
    let mut residual = grid.values.clone();
    let mut out = Elimination {
        weights: Vec::new(),
        x_slices: Vec::new(),
        y_slices: Vec::new(),
        converged: false,
    };
    loop {
        let (mut pi, mut pj, mut best) = (0, 0, 0.0f64);
        for i in 0..m {
            for j in 0..m {
                let a = residual[i * m + j].abs();
                if a > best {
                    best = a;
                    pi = i;
                    pj = j;
                }
            }
        }
        if best <= pivot_tol && !out.weights.is_empty() {
            out.converged = true;
            return out;
        }
        if best == 0.0 {
            // identically zero function
            out.weights.push(0.0);
            out.x_slices.push(vec![0.0; m]);
            out.y_slices.push(vec![0.0; m]);
            out.converged = true;
            return out;
        }
        if out.weights.len() == max_rank {
            return out;
        }
        let pivot = residual[pi * m + pj];
        let col: Vec<f64> = (0..m).map(|i| residual[i * m + pj]).collect();
        let row: Vec<f64> = residual[pi * m..(pi + 1) * m].to_vec();
        let d = 1.0 / pivot;
        for i in 0..m {
            let ci = col[i] * d;
            if ci == 0.0 {
                continue;
            }
            let line = &mut residual[i * m..(i + 1) * m];
            for (r, &rj) in line.iter_mut().zip(&row) {
                *r -= ci * rj;
            }
        }
        if best <= pivot_tol {
            // first pivot of a function already below target
            out.weights.push(d);
            out.x_slices.push(col);
            out.y_slices.push(row);
            out.converged = true;
            return out;
        }
        out.weights.push(d);
        out.x_slices.push(col);
        out.y_slices.push(row);
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn tail_max(coeffs: &[f64]) -> f64 {
    let n = coeffs.len();
    let start = n - (n / 4).max(2).min(n);
    max_abs(&coeffs[start..])
}

/// Adaptive low-rank Chebyshev approximation of `f` on
/// `x_range x y_range` to absolute accuracy `opts.tol`.
///
/// Square grids of orders `min_order, 2 min_order, ...` are sampled until
/// the pivot slices found by complete-pivoting elimination are resolved.
/// The final slices are fitted at the last order and trailing coefficients
/// are trimmed.
pub fn lowrank_fit_2d<F>(
    f: F,
    x_range: (f64, f64),
    y_range: (f64, f64),
    opts: &LowRankOptions,
) -> Result<LowRankFit>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    if !(opts.tol > 0.0) {
        return Err(Error::argument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if opts.min_order == 0 || opts.max_order < opts.min_order || opts.max_rank == 0 {
        return Err(Error::argument("invalid rank/order limits"));
    }
    let mut evaluations = 0;
    let mut order = opts.min_order;
    let mut coarse: Option<Grid> = None;
    loop {
        let grid = Grid::sample(&f, order, x_range, y_range, coarse.as_ref(), &mut evaluations)?;
        let elim = eliminate(&grid, PIVOT_FRACTION * opts.tol, opts.max_rank);
        let resolved = elim.converged && slices_resolved(&elim, opts.tol);
        let last = order * 2 > opts.max_order;
        if (resolved || last) && elim.converged {
            if resolved {
                if let Some((model, residual)) = trimmed(&elim, &grid, x_range, y_range, opts.tol)? {
                    return Ok(LowRankFit {
                        model,
                        residual,
                        grid_order: order,
                        evaluations,
                    });
                }
            }
            let model = assemble(&elim, x_range, y_range, None)?;
            let residual = grid_residual(&model, &grid);
            if resolved && residual <= opts.tol {
                return Ok(LowRankFit {
                    model,
                    residual,
                    grid_order: order,
                    evaluations,
                });
            }
            if last {
                return Err(Error::FitFailure {
                    rank: model.rank(),
                    order,
                    residual: residual.max(unresolved_level(&elim)),
                    tol: opts.tol,
                });
            }
        } else if last || !elim.converged {
            return Err(Error::FitFailure {
                rank: elim.weights.len(),
                order,
                residual: remaining_residual(&grid, &elim),
                tol: opts.tol,
            });
        }
        coarse = Some(grid);
        order *= 2;
    }
}

/// Low-rank approximation from a single grid of fixed `order`, eliminating
/// until the pivot falls below `pivot_tol` (or the grid is exhausted). No
/// coefficient trimming.
pub fn lowrank_fit_fixed<F>(
    f: F,
    order: usize,
    x_range: (f64, f64),
    y_range: (f64, f64),
    pivot_tol: f64,
) -> Result<LowRankFit>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let mut evaluations = 0;
    let grid = Grid::sample(&f, order, x_range, y_range, None, &mut evaluations)?;
    let elim = eliminate(&grid, pivot_tol, order + 1);
    let model = assemble(&elim, x_range, y_range, None)?;
    let residual = grid_residual(&model, &grid);
    Ok(LowRankFit {
        model,
        residual,
        grid_order: order,
        evaluations,
    })
}

fn term_scales(elim: &Elimination) -> Vec<(f64, f64)> {
    // (magnitude multiplying an x-slice error, magnitude multiplying a y-slice error)
    elim.weights
        .iter()
        .zip(elim.x_slices.iter().zip(&elim.y_slices))
        .map(|(d, (xs, ys))| (d.abs() * max_abs(ys), d.abs() * max_abs(xs)))
        .collect()
}

fn slices_resolved(elim: &Elimination, tol: f64) -> bool {
    unresolved_level(elim) <= RESOLUTION_FRACTION * tol
}

fn unresolved_level(elim: &Elimination) -> f64 {
    let scales = term_scales(elim);
    let mut worst = 0.0f64;
    for ((xs, ys), (sx, sy)) in elim.x_slices.iter().zip(&elim.y_slices).zip(scales) {
        worst = worst.max(sx * tail_max(&interp_coeffs(xs)));
        worst = worst.max(sy * tail_max(&interp_coeffs(ys)));
    }
    worst
}

/// Most aggressively trimmed model whose grid residual stays within
/// `TRIMMED_FRACTION * tol`.
fn trimmed(
    elim: &Elimination,
    grid: &Grid,
    x_range: (f64, f64),
    y_range: (f64, f64),
    tol: f64,
) -> Result<Option<(LowRank2D, f64)>> {
    for frac in TRUNCATION_FRACTIONS {
        let model = assemble(elim, x_range, y_range, Some(frac * tol))?;
        let residual = grid_residual(&model, grid);
        if residual <= TRIMMED_FRACTION * tol {
            return Ok(Some((model, residual)));
        }
    }
    Ok(None)
}

/// Fits the pivot slices; with a `budget`, trailing coefficients of each
/// slice are dropped up to `budget` divided by the slice's term magnitude.
fn assemble(
    elim: &Elimination,
    x_range: (f64, f64),
    y_range: (f64, f64),
    budget: Option<f64>,
) -> Result<LowRank2D> {
    let scales = term_scales(elim);
    let mut rows = Vec::with_capacity(elim.weights.len());
    let mut cols = Vec::with_capacity(elim.weights.len());
    for ((xs, ys), (sx, sy)) in elim.x_slices.iter().zip(&elim.y_slices).zip(scales) {
        let mut r = Cheb1D::fit(xs, x_range.0, x_range.1)?;
        let mut c = Cheb1D::fit(ys, y_range.0, y_range.1)?;
        if let Some(budget) = budget {
            if sx > 0.0 {
                r.truncate(budget / sx);
            }
            if sy > 0.0 {
                c.truncate(budget / sy);
            }
        }
        rows.push(r);
        cols.push(c);
    }
    LowRank2D::new(elim.weights.clone(), rows, cols)
}

fn grid_residual(model: &LowRank2D, grid: &Grid) -> f64 {
    let m = grid.order + 1;
    let (x0, x1) = model.x_range();
    let (y0, y1) = model.y_range();
    let mut worst = 0.0f64;
    for (i, &x) in grid.xs.iter().enumerate() {
        let sx = to_unit(x, x0, x1).clamp(-1.0, 1.0);
        for (j, &y) in grid.ys.iter().enumerate() {
            let sy = to_unit(y, y0, y1).clamp(-1.0, 1.0);
            worst = worst.max((model.eval_unit(sx, sy) - grid.values[i * m + j]).abs());
        }
    }
    worst
}

fn remaining_residual(grid: &Grid, elim: &Elimination) -> f64 {
    let m = grid.order + 1;
    let mut worst = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            let approx: f64 = elim
                .weights
                .iter()
                .zip(elim.x_slices.iter().zip(&elim.y_slices))
                .map(|(d, (xs, ys))| d * xs[i] * ys[j])
                .sum();
            worst = worst.max((grid.values[i * m + j] - approx).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine_form(coeffs: &[f64], s: f64) -> f64 {
        let theta = s.clamp(-1.0, 1.0).acos();
        coeffs
            .iter()
            .enumerate()
            .map(|(j, a)| a * (j as f64 * theta).cos())
            .sum()
    }

    #[test]
    fn nodes() {
        assert!(cheb_nodes(0).is_err());
        assert_eq!(cheb_nodes(1).unwrap(), vec![1.0, -1.0]);
        assert_eq!(cheb_nodes(2).unwrap(), vec![1.0, 0.0, -1.0]);
        let n4 = cheb_nodes(4).unwrap();
        let h = 0.5f64.sqrt();
        for (a, b) in n4.iter().zip([1.0, h, 0.0, -h, -1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        let n7 = cheb_nodes(7).unwrap();
        for k in 0..=7 {
            assert_eq!(n7[k], -n7[7 - k]);
        }
    }

    #[test]
    fn fit_constant_and_t2() {
        let p = Cheb1D::fit(&[7.0; 9], -1.0, 1.0).unwrap();
        assert!((p.coeffs()[0] - 7.0).abs() < 1e-14);
        assert!(p.coeffs()[1..].iter().all(|a| a.abs() < 1e-14));

        let t2: Vec<f64> = cheb_nodes(4).unwrap().iter().map(|s| 2.0 * s * s - 1.0).collect();
        let p = Cheb1D::fit(&t2, -1.0, 1.0).unwrap();
        for (j, a) in p.coeffs().iter().enumerate() {
            let expected = if j == 2 { 1.0 } else { 0.0 };
            assert!((a - expected).abs() < 1e-14, "a_{j} = {a}");
        }
        assert!(Cheb1D::fit(&[], -1.0, 1.0).is_err());
    }

    #[test]
    fn fit_reproduces_nodal_values() {
        let xs = Cheb1D::nodes(37, -5.0, 0.0).unwrap();
        let vals: Vec<f64> = xs.iter().map(|x| (3.0 * x).sin() + x * x).collect();
        let p = Cheb1D::fit(&vals, -5.0, 0.0).unwrap();
        let scale = max_abs(&vals);
        for (x, v) in xs.iter().zip(&vals) {
            assert!((p.eval(*x).unwrap() - v).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn exp_dense_check() {
        let p = Cheb1D::fit_fn(f64::exp, 20, -1.0, 1.0).unwrap();
        let worst = (0..1000)
            .map(|i| -1.0 + 2.0 * i as f64 / 999.0)
            .map(|t| (p.eval(t).unwrap() - t.exp()).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-14, "{worst:e}");
    }

    #[test]
    fn eval_examples() {
        let t2 = Cheb1D::new(vec![0.0, 0.0, 1.0], -1.0, 1.0).unwrap();
        assert!((t2.eval(0.5).unwrap() + 0.5).abs() < 1e-16);
        let id = Cheb1D::new(vec![0.0, 1.0], -1.0, 1.0).unwrap();
        for &t in &[-1.0, -0.3, 0.0, 0.77, 1.0] {
            assert_eq!(id.eval(t).unwrap(), t);
        }
        let s = Cheb1D::fit_fn(f64::sin, 25, -1.0, 1.0).unwrap();
        assert!((s.eval(0.3).unwrap() - 0.295_520_206_661_339_6).abs() < 1e-14);
    }

    #[test]
    fn eval_domain() {
        let p = Cheb1D::new(vec![1.0, 2.0], 0.0, 2.0).unwrap();
        assert!(p.eval(2.0 + 1e-13).is_ok());
        assert!(p.eval(2.0 + 1e-9).is_err());
        assert!(p.eval(-0.5).is_err());
        assert!(Cheb1D::new(vec![1.0], 1.0, 1.0).is_err());
        assert!(Cheb1D::new(vec![], 0.0, 1.0).is_err());
    }

    #[test]
    fn derivative_matches_analytic() {
        let p = Cheb1D::fit_fn(|x| (2.0 * x).sin(), 30, -1.0, 3.0).unwrap();
        for &x in &[-1.0, 0.0, 1.3, 3.0] {
            let (v, d) = p.eval_with_derivative(x).unwrap();
            assert!((v - (2.0 * x).sin()).abs() < 1e-13);
            assert!((d - 2.0 * (2.0 * x).cos()).abs() < 1e-11);
        }
    }

    #[test]
    fn recurrence_agrees_with_cosine_form() {
        let p = Cheb1D::fit_fn(|x| 1.0 / (1.0 + 9.0 * x * x), 60, -1.0, 1.0).unwrap();
        for i in 0..1000 {
            let s = -1.0 + 2.0 * ((i as f64 * 0.618_033_988_75) % 1.0);
            assert!((p.eval_unit(s) - cosine_form(p.coeffs(), s)).abs() < 1e-13);
        }
    }

    #[test]
    fn blocked_basis_matches_cosines() {
        for &s in &[-1.0, -0.73, 0.0, 0.31, 0.999, 1.0] {
            let mut b = vec![0.0; 260];
            cheb_basis(s, &mut b);
            let theta = f64::acos(s);
            for (j, t) in b.iter().enumerate() {
                assert!((t - (j as f64 * theta).cos()).abs() < 1e-12, "s={s} j={j}");
            }
        }
        let mut short = [0.0; 3];
        cheb_basis(0.5, &mut short);
        assert_eq!(short, [1.0, 0.5, -0.5]);
    }

    #[test]
    fn bank_matches_single_slices() {
        let slices: Vec<Cheb1D> = (1..=11)
            .map(|k| Cheb1D::fit_fn(|t| (k as f64 * t).sin() + t * t, 3 * k, -2.0, 1.0).unwrap())
            .collect();
        let scale: Vec<f64> = (0..11).map(|j| 0.5 + j as f64).collect();
        let bank = SliceBank::new(&slices, Some(&scale));
        assert_eq!((bank.order(), bank.padded()), (34, 16));
        let mut out = [f64::NAN; 16];
        for i in 0..=40 {
            let s = -1.0 + i as f64 / 20.0;
            bank.eval_unit_into(s, &mut out);
            for (j, p) in slices.iter().enumerate() {
                let want = scale[j] * p.eval_unit(s);
                assert!((out[j] - want).abs() < 1e-13 * want.abs().max(1.0));
            }
            assert!(out[11..].iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn truncate_respects_budget() {
        let mut p = Cheb1D::new(vec![1.0, 0.5, 1e-3, 1e-8, 1e-9, 1e-10], -1.0, 1.0).unwrap();
        p.truncate(2e-8);
        assert_eq!(p.len(), 3);
        let mut q = Cheb1D::new(vec![1e-20], -1.0, 1.0).unwrap();
        q.truncate(1.0);
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn tensor_examples() {
        let one = Tensor2D::fit_fn(|_, _| 1.0, (6, 5), (-1.0, 1.0), (-1.0, 1.0)).unwrap();
        for i in 0..=6 {
            for j in 0..=5 {
                let e = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                assert!((one.coeff(i, j) - e).abs() < 1e-14);
            }
        }
        let t1t2 = Tensor2D::fit_fn(|x, y| x * (2.0 * y * y - 1.0), (4, 4), (-1.0, 1.0), (-1.0, 1.0)).unwrap();
        for i in 0..=4 {
            for j in 0..=4 {
                let e = if i == 1 && j == 2 { 1.0 } else { 0.0 };
                assert!((t1t2.coeff(i, j) - e).abs() < 1e-13);
            }
        }
        let ex = Tensor2D::fit_fn(|x, y| (x + y).exp(), (20, 20), (-1.0, 1.0), (-1.0, 1.0)).unwrap();
        let mut worst = 0.0f64;
        for i in 0..100 {
            for j in 0..100 {
                let x = -1.0 + 2.0 * i as f64 / 99.0;
                let y = -1.0 + 2.0 * j as f64 / 99.0;
                worst = worst.max((ex.eval(x, y).unwrap() - (x + y).exp()).abs());
            }
        }
        assert!(worst < 1e-13, "{worst:e}");
        assert!(Tensor2D::fit(&[], (-1.0, 1.0), (-1.0, 1.0)).is_err());
    }

    #[test]
    fn lowrank_ranks_of_simple_functions() {
        let opts = LowRankOptions::new(1e-12);
        let sep = lowrank_fit_2d(|x, y| Ok(x.sin() * y.cos()), (-1.0, 1.0), (-1.0, 1.0), &opts).unwrap();
        assert_eq!(sep.model.rank(), 1);
        let sum = lowrank_fit_2d(|x, y| Ok(x + y), (-1.0, 1.0), (-1.0, 1.0), &opts).unwrap();
        assert_eq!(sum.model.rank(), 2);
        let xy = lowrank_fit_2d(|x, y| Ok(x * y), (-1.0, 1.0), (-1.0, 1.0), &opts).unwrap();
        assert_eq!(xy.model.rank(), 1);
        assert!((xy.model.eval(0.5, -0.5).unwrap() + 0.25).abs() < 1e-14);
    }

    #[test]
    fn lowrank_exp_sum() {
        let tol = 1e-12;
        let fit = lowrank_fit_2d(|x, y| Ok((x + y).exp()), (-1.0, 1.0), (-1.0, 1.0), &LowRankOptions::new(tol)).unwrap();
        assert!((fit.model.eval(0.1, 0.2).unwrap() - 0.3f64.exp()).abs() < tol);
        assert!(fit.residual <= tol);
    }

    #[test]
    fn lowrank_reports_failure() {
        let mut opts = LowRankOptions::new(1e-12);
        opts.max_rank = 2;
        let err = lowrank_fit_2d(|x, y| Ok(1.0 / (1.0 + x * x + y * y)), (-1.0, 1.0), (-1.0, 1.0), &opts)
            .unwrap_err();
        assert!(matches!(err, Error::FitFailure { rank: 2, .. }), "{err:?}");
        let opts = LowRankOptions::new(0.0);
        assert!(lowrank_fit_2d(|_, _| Ok(1.0), (-1.0, 1.0), (-1.0, 1.0), &opts).is_err());
    }

    #[test]
    fn lowrank_zero_function() {
        let fit = lowrank_fit_2d(|_, _| Ok(0.0), (-1.0, 1.0), (0.0, 1.0), &LowRankOptions::new(1e-9)).unwrap();
        assert_eq!(fit.model.rank(), 1);
        assert_eq!(fit.model.eval(0.3, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn lowrank_rectangle_and_domain() {
        let fit = lowrank_fit_2d(
            |x, y| Ok((x * y).cos() + x),
            (-5.0, 0.0),
            (0.5, 2.0),
            &LowRankOptions::new(1e-10),
        )
        .unwrap();
        assert!(((fit.model.eval(-2.0, 1.5).unwrap()) - ((-3.0f64).cos() - 2.0)).abs() < 1e-10);
        assert!(fit.model.eval(0.1, 1.0).is_err());
        assert!(fit.model.eval(-1.0, 2.5).is_err());
    }
}
