//! Tabulated distributions on an interval: trapezoidal CDFs and inverse
//! transform sampling with linear interpolation.

/// `n` equally spaced points covering `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two points");
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

/// Trapezoidal integral of `ys` sampled at `xs`.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Running trapezoidal integral, starting at zero.
pub fn cumulative_trapezoid(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    debug_assert_eq!(xs.len(), ys.len());
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..xs.len() {
        acc += 0.5 * (xs[i] - xs[i - 1]) * (ys[i] + ys[i - 1]);
        out.push(acc);
    }
    out
}

/// Linear interpolation of `(xs, ys)` at `x`; `xs` ascending. Values outside
/// the grid are clamped to the end points.
pub fn interp(x: f64, xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    // first index with xs[i] > x, so xs[i-1] <= x < xs[i]
    let i = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let w = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
    ys[i - 1] + w * (ys[i] - ys[i - 1])
}

/// A normalized CDF on a grid, inverted by linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCdf {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl TabulatedCdf {
    /// Builds the CDF of the (unnormalized, nonnegative) density `pdf`
    /// tabulated on `grid`. Returns `None` when the density has no mass.
    pub fn from_pdf(grid: Vec<f64>, pdf: &[f64]) -> Option<Self> {
        let mut cdf = cumulative_trapezoid(&grid, pdf);
        let total = *cdf.last()?;
        if !(total > 0.0) || !total.is_finite() {
            return None;
        }
        for c in &mut cdf {
            *c /= total;
        }
        *cdf.last_mut().unwrap() = 1.0;
        Some(TabulatedCdf { grid, cdf })
    }

    /// Wraps an already-normalized CDF; used when loading cached tables.
    pub fn from_parts(grid: Vec<f64>, cdf: Vec<f64>) -> Self {
        TabulatedCdf { grid, cdf }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.cdf
    }

    /// CDF at `x` by linear interpolation.
    pub fn cdf(&self, x: f64) -> f64 {
        interp(x, &self.grid, &self.cdf)
    }

    /// Inverse CDF at `u ∈ [0, 1]`. Flat stretches (zero density) resolve to
    /// their left end.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.cdf.len();
        if u <= 0.0 {
            return self.grid[0];
        }
        if u >= 1.0 {
            return self.grid[n - 1];
        }
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, n - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let w = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        self.grid[i - 1] + w * (self.grid[i] - self.grid[i - 1])
    }
}
