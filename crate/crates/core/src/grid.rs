//! Uniform co-moving grids, profiles sampled on them, and the exponentially
//! weighted quadrature used for every inner product and energy.
//!
//! Grid points are always generated as `origin + j*h`; shifting a profile only
//! moves the origin and never touches the samples. All cell weights are
//! evaluated as `e^b * e^(x_mid - b)` with `b` the right endpoint, so the
//! origin-dependent factor is a single scalar. That scalar is carried as
//! `e^b0 * e^t` with `t` the accumulated translation, which makes the identity
//! `|s_a(w)|^2 = e^a |w|^2` hold to a few ulps.

use crate::error::{Error, Result};
use crate::scalar::Real;
use std::sync::Arc;

/// Right endpoints beyond this would push `e^x` toward overflow.
pub const RIGHT_END_CAP: f64 = 600.0;

/// Transverse extent of a 2D strip grid `[-half_width, half_width]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Strip<T> {
    pub half_width: T,
    pub n_y: usize,
}

impl<T: Real> Strip<T> {
    pub fn h_y(&self) -> T {
        (self.half_width + self.half_width) / T::of_usize(self.n_y)
    }
}

#[derive(Clone, Debug)]
pub struct Grid<T> {
    origin: T,
    h: T,
    n_x: usize,
    strip: Option<Strip<T>>,
    // e^(x_mid - b) for every x-cell; depends only on h and n_x
    cell_weights: Arc<[T]>,
    // right end when the grid was built, and the translation applied since;
    // e^b is evaluated as e^anchor * e^drift so a shift by `a` scales it by e^a
    anchor: T,
    drift: T,
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.origin == other.origin && self.same_shape(other)
    }
}

impl<T: Real> Grid<T> {
    /// 1D grid with points `origin + j*h`, `j = 0..=n_x`.
    pub fn line(origin: T, h: T, n_x: usize) -> Result<Self> {
        Self::build(origin, h, n_x, None)
    }

    /// 2D strip grid; rows `y_k = -half_width + k*h_y`, `k = 0..=n_y`.
    pub fn strip(origin: T, h: T, n_x: usize, half_width: T, n_y: usize) -> Result<Self> {
        if !(half_width > T::zero() && half_width.is_finite()) {
            return Err(Error::invalid(format!("strip half-width must be positive, got {half_width}")));
        }
        if n_y < 2 {
            return Err(Error::invalid(format!("need n_y >= 2, got {n_y}")));
        }
        Self::build(origin, h, n_x, Some(Strip { half_width, n_y }))
    }

    fn build(origin: T, h: T, n_x: usize, strip: Option<Strip<T>>) -> Result<Self> {
        if !(h > T::zero() && h.is_finite()) {
            return Err(Error::invalid(format!("grid spacing must be positive, got {h}")));
        }
        if !origin.is_finite() {
            return Err(Error::invalid("grid origin must be finite"));
        }
        if n_x < 2 {
            return Err(Error::invalid(format!("need n_x >= 2, got {n_x}")));
        }
        let half = T::lit(0.5);
        let n = T::of_usize(n_x);
        let cell_weights: Arc<[T]> = (0..n_x)
            .map(|j| ((T::of_usize(j) + half - n) * h).exp())
            .collect();
        Ok(Self {
            origin,
            h,
            n_x,
            strip,
            cell_weights,
            anchor: origin + n * h,
            drift: T::zero(),
        })
    }

    /// Same grid with a different strip half-width (rows are relabelled, not resampled).
    pub fn with_half_width(&self, half_width: T) -> Result<Self> {
        let strip = self
            .strip
            .ok_or_else(|| Error::invalid("with_half_width on a 1D grid"))?;
        if !(half_width > T::zero() && half_width.is_finite()) {
            return Err(Error::invalid("strip half-width must be positive"));
        }
        let mut g = self.clone();
        g.strip = Some(Strip {
            half_width,
            n_y: strip.n_y,
        });
        Ok(g)
    }

    /// Same shape, new left endpoint.
    pub fn with_origin(&self, origin: T) -> Result<Self> {
        if !origin.is_finite() {
            return Err(Error::invalid("grid origin must be finite"));
        }
        let mut g = self.clone();
        g.origin = origin;
        g.anchor = g.right_end();
        g.drift = T::zero();
        Ok(g)
    }

    /// Same samples, physical coordinates divided by `factor` (origin and spacings).
    pub fn rescaled(&self, factor: T) -> Result<Self> {
        if !(factor > T::zero() && factor.is_finite()) {
            return Err(Error::invalid("rescale factor must be positive"));
        }
        let strip = self.strip.map(|s| Strip {
            half_width: s.half_width / factor,
            n_y: s.n_y,
        });
        Self::build(self.origin / factor, self.h / factor, self.n_x, strip)
    }

    pub fn dim(&self) -> usize {
        if self.strip.is_some() {
            2
        } else {
            1
        }
    }

    pub fn origin(&self) -> T {
        self.origin
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn strip_info(&self) -> Option<Strip<T>> {
        self.strip
    }

    /// Number of y-intervals (0 for a 1D grid).
    pub fn n_y(&self) -> usize {
        self.strip.map_or(0, |s| s.n_y)
    }

    pub fn h_y(&self) -> Option<T> {
        self.strip.map(|s| s.h_y())
    }

    /// Points per row in x.
    pub fn nx_points(&self) -> usize {
        self.n_x + 1
    }

    /// Number of rows (1 for 1D).
    pub fn rows(&self) -> usize {
        self.strip.map_or(1, |s| s.n_y + 1)
    }

    pub fn len(&self) -> usize {
        self.nx_points() * self.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, j: usize, k: usize) -> usize {
        k * (self.n_x + 1) + j
    }

    #[inline]
    pub fn x(&self, j: usize) -> T {
        self.origin + T::of_usize(j) * self.h
    }

    #[inline]
    pub fn y(&self, k: usize) -> T {
        match self.strip {
            Some(s) => -s.half_width + T::of_usize(k) * s.h_y(),
            None => T::zero(),
        }
    }

    pub fn right_end(&self) -> T {
        self.x(self.n_x)
    }

    pub fn length(&self) -> T {
        T::of_usize(self.n_x) * self.h
    }

    /// Everything but the origin agrees.
    pub fn same_shape(&self, other: &Self) -> bool {
        self.h == other.h && self.n_x == other.n_x && self.strip == other.strip
    }

    /// True when `(j, k)` sits on a Dirichlet row of a strip.
    #[inline]
    pub fn is_dirichlet_row(&self, k: usize) -> bool {
        match self.strip {
            Some(s) => k == 0 || k == s.n_y,
            None => false,
        }
    }

    pub(crate) fn cell_weights(&self) -> &[T] {
        &self.cell_weights
    }

    /// `e^b` for the right endpoint `b`, guarded against overflow.
    pub(crate) fn weight_scale(&self) -> Result<T> {
        let b = self.right_end();
        let scale = self.anchor.exp() * self.drift.exp();
        if b.to_f64_lossy() > RIGHT_END_CAP || !scale.is_finite() {
            return Err(Error::DomainTruncation {
                right_end: b.to_f64_lossy(),
                cap: RIGHT_END_CAP,
            });
        }
        Ok(scale)
    }

    /// Area element of one quadrature cell.
    pub(crate) fn cell_area(&self) -> T {
        match self.strip {
            Some(s) => self.h * s.h_y(),
            None => self.h,
        }
    }
}

/// Samples of a function on every point of a [`Grid`].
#[derive(Clone, Debug)]
pub struct Profile<T> {
    grid: Grid<T>,
    samples: Vec<T>,
}

impl<T: Real> PartialEq for Profile<T> {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.samples == other.samples
    }
}

impl<T: Real> Profile<T> {
    pub fn new(grid: Grid<T>, samples: Vec<T>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::invalid(format!(
                "{} samples for a grid of {} points",
                samples.len(),
                grid.len()
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        if grid.dim() == 2 {
            let nxp = grid.nx_points();
            let last = grid.rows() - 1;
            let edge = samples[..nxp].iter().chain(&samples[last * nxp..]);
            if edge.into_iter().any(|&s| s != T::zero()) {
                return Err(Error::invalid("strip profile must vanish on y = +-half_width"));
            }
        }
        Ok(Self { grid, samples })
    }

    /// Assumes `samples` already satisfies every invariant.
    pub(crate) fn from_parts(grid: Grid<T>, samples: Vec<T>) -> Self {
        debug_assert_eq!(samples.len(), grid.len());
        Self { grid, samples }
    }

    pub fn zeros(grid: Grid<T>) -> Self {
        let n = grid.len();
        Self::from_parts(grid, vec![T::zero(); n])
    }

    /// Samples `f(x, y)` at every point; Dirichlet rows are forced to zero.
    pub fn from_fn(grid: Grid<T>, mut f: impl FnMut(T, T) -> T) -> Result<Self> {
        let mut samples = Vec::with_capacity(grid.len());
        for k in 0..grid.rows() {
            let y = grid.y(k);
            for j in 0..grid.nx_points() {
                samples.push(if grid.is_dirichlet_row(k) {
                    T::zero()
                } else {
                    f(grid.x(j), y)
                });
            }
        }
        Self::new(grid, samples)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    #[inline]
    pub fn at(&self, j: usize, k: usize) -> T {
        self.samples[self.grid.index(j, k)]
    }

    pub fn max_value(&self) -> T {
        self.samples
            .iter()
            .fold(T::neg_infinity(), |m, &x| m.max(x))
    }

    pub fn min_value(&self) -> T {
        self.samples.iter().fold(T::infinity(), |m, &x| m.min(x))
    }

    pub fn sup_norm(&self) -> T {
        crate::scalar::max_abs(&self.samples)
    }

    /// Same samples on a relabelled grid of identical shape.
    pub fn with_grid(&self, grid: Grid<T>) -> Result<Self> {
        if grid.len() != self.grid.len() || grid.nx_points() != self.grid.nx_points() {
            return Err(Error::GridMismatch);
        }
        Ok(Self::from_parts(grid, self.samples.clone()))
    }

    /// Pointwise map; Dirichlet rows stay zero only if `f(0) == 0`.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_parts(self.grid.clone(), self.samples.iter().map(|&s| f(s)).collect())
    }

    /// `a*self + b*other` on a shared grid.
    pub fn lin_comb(&self, a: T, other: &Self, b: T) -> Result<Self> {
        check_same_grid(self, other)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        Ok(Self::from_parts(self.grid.clone(), samples))
    }

    /// Index-wise maximum of `|self_i - other_i|` (grids may differ in origin).
    pub fn sup_diff(&self, other: &Self) -> Result<T> {
        if !self.grid.same_shape(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }
}

pub(crate) fn check_same_grid<T: Real>(u: &Profile<T>, v: &Profile<T>) -> Result<()> {
    if u.grid == v.grid {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Translates a profile by moving its grid origin; samples are untouched.
pub fn shift_grid<T: Real>(p: &Profile<T>, offset: T) -> Result<Profile<T>> {
    if !offset.is_finite() {
        return Err(Error::invalid(format!("non-finite shift offset {offset}")));
    }
    let mut grid = p.grid.clone();
    grid.origin = grid.origin + offset;
    grid.drift = grid.drift + offset;
    Ok(Profile::from_parts(grid, p.samples.clone()))
}

/// x-derivative: centered in the interior, second-order one-sided at both ends.
pub fn diff_x<T: Real>(p: &Profile<T>) -> Profile<T> {
    let g = &p.grid;
    let n = g.n_x;
    let two_h = g.h + g.h;
    let (three, four) = (T::lit(3.0), T::lit(4.0));
    let mut out = vec![T::zero(); g.len()];
    for k in 0..g.rows() {
        let row = &p.samples[g.index(0, k)..=g.index(n, k)];
        let dst = &mut out[g.index(0, k)..=g.index(n, k)];
        dst[0] = (-three * row[0] + four * row[1] - row[2]) / two_h;
        for j in 1..n {
            dst[j] = (row[j + 1] - row[j - 1]) / two_h;
        }
        dst[n] = (three * row[n] - four * row[n - 1] + row[n - 2]) / two_h;
    }
    Profile::from_parts(g.clone(), out)
}

/// Composite midpoint rule for `integral of e^x g`: cell-midpoint weight times
/// the corner average of the integrand.
pub fn weighted_integral<T: Real>(integrand: &Profile<T>) -> Result<T> {
    let g = &integrand.grid;
    let s = &integrand.samples;
    let quarter = T::lit(0.25);
    let half = T::lit(0.5);
    cell_quadrature(g, |j, k| match g.dim() {
        1 => half * (s[j] + s[j + 1]),
        _ => {
            let (a, b) = (g.index(j, k), g.index(j, k + 1));
            quarter * (s[a] + s[a + 1] + s[b] + s[b + 1])
        }
    })
}

/// `<u, v>` in the weighted L2 space.
pub fn inner_l2exp<T: Real>(u: &Profile<T>, v: &Profile<T>) -> Result<T> {
    check_same_grid(u, v)?;
    let g = &u.grid;
    let (a, b) = (&u.samples, &v.samples);
    let quarter = T::lit(0.25);
    let half = T::lit(0.5);
    cell_quadrature(g, |j, k| match g.dim() {
        1 => half * (a[j] * b[j] + a[j + 1] * b[j + 1]),
        _ => {
            let (p, q) = (g.index(j, k), g.index(j, k + 1));
            quarter
                * (a[p] * b[p] + a[p + 1] * b[p + 1] + a[q] * b[q] + a[q + 1] * b[q + 1])
        }
    })
}

/// `<u, v>` in the weighted H1 space. The cell derivative is the difference
/// across the cell; in 2D edge products are averaged over the two parallel edges.
pub fn inner_h1exp<T: Real>(u: &Profile<T>, v: &Profile<T>) -> Result<T> {
    check_same_grid(u, v)?;
    let l2 = inner_l2exp(u, v)?;
    Ok(l2 + gradient_product(u, v)?)
}

pub fn norm_h1exp_sq<T: Real>(u: &Profile<T>) -> Result<T> {
    inner_h1exp(u, u)
}

/// `integral of e^x grad u . grad v` with the same cell conventions as [`inner_h1exp`].
pub fn gradient_product<T: Real>(u: &Profile<T>, v: &Profile<T>) -> Result<T> {
    check_same_grid(u, v)?;
    let g = &u.grid;
    let (a, b) = (&u.samples, &v.samples);
    let inv_h2 = (g.h * g.h).recip();
    match g.strip {
        None => cell_quadrature(g, |j, _| (a[j + 1] - a[j]) * (b[j + 1] - b[j]) * inv_h2),
        Some(s) => {
            let hy = s.h_y();
            let inv_hy2 = (hy * hy).recip();
            let half = T::lit(0.5);
            cell_quadrature(g, |j, k| {
                let (p, q) = (g.index(j, k), g.index(j, k + 1));
                let dx = (a[p + 1] - a[p]) * (b[p + 1] - b[p]) + (a[q + 1] - a[q]) * (b[q + 1] - b[q]);
                let dy = (a[q] - a[p]) * (b[q] - b[p]) + (a[q + 1] - a[p + 1]) * (b[q + 1] - b[p + 1]);
                half * (dx * inv_h2 + dy * inv_hy2)
            })
        }
    }
}

/// `sum over cells of e^(x_mid) * value(j, k) * area`, factored as
/// `e^b * sum(e^(x_mid - b) * value)`.
pub(crate) fn cell_quadrature<T: Real>(g: &Grid<T>, value: impl Fn(usize, usize) -> T) -> Result<T> {
    let scale = g.weight_scale()?;
    let w = g.cell_weights();
    let cells_y = g.strip.map_or(1, |s| s.n_y);
    let mut total = T::zero();
    for (j, &wj) in w.iter().enumerate() {
        let mut column = T::zero();
        for k in 0..cells_y {
            column = column + value(j, k);
        }
        total = total + wj * column;
    }
    Ok(scale * total * g.cell_area())
}
