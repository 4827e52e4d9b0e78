//! Images, orientation stacks and the discrete left-invariant vector fields.
//!
//! Stacks sample the projective tangent bundle: slice `k` holds the angle
//! `k * pi / n_theta`, the spatial `x` axis runs along columns and `y` along
//! rows. All second-order operators use centered differences with the
//! boundary rule selected in [`GridSpec`]; the angular axis always wraps.

use std::f64::consts::PI;

use ndarray::{Array2, Array3, Zip};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Spatial boundary rule. The angular axis is always periodic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    /// Half-sample mirror: the ghost cell outside an edge copies the edge value.
    #[default]
    Reflect,
}

impl Boundary {
    /// Lower and upper neighbor of every index along an axis of length `n`.
    pub(crate) fn neighbor_table(self, n: usize) -> (Vec<usize>, Vec<usize>) {
        let minus = (0..n)
            .map(|i| match self {
                Boundary::Periodic => (i + n - 1) % n,
                Boundary::Reflect => i.saturating_sub(1),
            })
            .collect();
        let plus = (0..n)
            .map(|i| match self {
                Boundary::Periodic => (i + 1) % n,
                Boundary::Reflect => (i + 1).min(n - 1),
            })
            .collect();
        (minus, plus)
    }

    /// Map an arbitrary (possibly far out of range) index back onto `0..n`.
    pub(crate) fn resolve(self, i: isize, n: usize) -> usize {
        let n = n as isize;
        match self {
            Boundary::Periodic => i.rem_euclid(n) as usize,
            Boundary::Reflect => {
                let m = i.rem_euclid(2 * n);
                (if m < n { m } else { 2 * n - 1 - m }) as usize
            }
        }
    }
}

/// Grid geometry shared by every operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub n_theta: usize,
    pub dx: f64,
    pub dy: f64,
    pub boundary: Boundary,
}

impl GridSpec {
    /// Unit pixel spacing and reflecting borders.
    pub fn new(rows: usize, cols: usize, n_theta: usize) -> Result<Self> {
        let spec = GridSpec {
            rows,
            cols,
            n_theta,
            dx: 1.0,
            dy: 1.0,
            boundary: Boundary::Reflect,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Spec matching the dimensions of an existing stack.
    pub fn for_stack(stack: &OrientationStack) -> Self {
        GridSpec {
            rows: stack.rows(),
            cols: stack.cols(),
            n_theta: stack.n_theta(),
            dx: 1.0,
            dy: 1.0,
            boundary: Boundary::Reflect,
        }
    }

    pub fn with_spacing(mut self, dx: f64, dy: f64) -> Result<Self> {
        self.dx = dx;
        self.dy = dy;
        self.validate()?;
        Ok(self)
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows < 3 || self.cols < 3 {
            return Err(Error::config(format!(
                "grid must be at least 3x3, got {}x{}",
                self.rows, self.cols
            )));
        }
        if self.n_theta == 0 {
            return Err(Error::config("n_theta must be positive"));
        }
        if !(self.dx > 0.0 && self.dy > 0.0 && self.dx.is_finite() && self.dy.is_finite()) {
            return Err(Error::config(format!(
                "spacings must be positive, got dx={} dy={}",
                self.dx, self.dy
            )));
        }
        Ok(())
    }

    pub fn d_theta(&self) -> f64 {
        PI / self.n_theta as f64
    }

    pub fn theta(&self, k: usize) -> f64 {
        k as f64 * self.d_theta()
    }

    pub fn voxels(&self) -> usize {
        self.rows * self.cols * self.n_theta
    }

    pub(crate) fn check_stack(&self, stack: &OrientationStack) -> Result<()> {
        self.validate()?;
        if stack.rows() != self.rows || stack.cols() != self.cols || stack.n_theta() != self.n_theta
        {
            return Err(Error::config(format!(
                "stack is {}x{}x{} but grid spec is {}x{}x{}",
                stack.rows(),
                stack.cols(),
                stack.n_theta(),
                self.rows,
                self.cols,
                self.n_theta
            )));
        }
        Ok(())
    }
}

/// Grayscale image with intensities in `[0, 1]`; 0 is white, 1 is black.
#[derive(Clone, Debug, PartialEq)]
pub struct Image2D {
    data: Array2<f64>,
}

impl Image2D {
    /// Wrap an array, clamping values into `[0, 1]`.
    pub fn from_array(mut data: Array2<f64>) -> Result<Self> {
        let (rows, cols) = data.dim();
        if rows < 3 || cols < 3 {
            return Err(Error::config(format!(
                "image must be at least 3x3, got {rows}x{cols}"
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("image contains non-finite values"));
        }
        data.mapv_inplace(|v| v.clamp(0.0, 1.0));
        Ok(Image2D { data })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::from_array(Array2::from_shape_fn((rows, cols), |(r, c)| f(r, c)))
    }

    pub fn constant(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::from_fn(rows, cols, |_, _| value)
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[[r, c]]
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    /// Swap between the dark-on-light (0 = white) and the usual (0 = black) conventions.
    pub fn inverted(&self) -> Image2D {
        Image2D {
            data: self.data.mapv(|v| 1.0 - v),
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.mean().unwrap_or(0.0)
    }
}

/// Corruption mask; `true` marks a corrupted pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    data: Array2<bool>,
}

impl Mask {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Mask {
            data: Array2::from_elem((rows, cols), false),
        }
    }

    pub fn from_array(data: Array2<bool>) -> Self {
        Mask { data }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        Mask {
            data: Array2::from_shape_fn((rows, cols), |(r, c)| f(r, c)),
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[[r, c]]
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        self.data[[r, c]] = value;
    }

    pub fn data(&self) -> &Array2<bool> {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&m| m)
    }

    /// True when every pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.dim() == other.dim()
            && Zip::from(&self.data)
                .and(&other.data)
                .fold(true, |acc, &a, &b| acc && (!a || b))
    }

    pub(crate) fn check_matches(&self, image: &Image2D) -> Result<()> {
        if self.dim() != image.dim() {
            return Err(Error::config(format!(
                "mask is {:?} but image is {:?}",
                self.dim(),
                image.dim()
            )));
        }
        Ok(())
    }
}

/// Scalar field on `rows x cols x n_theta`, stored slice-major as `[k, r, c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientationStack {
    data: Array3<f64>,
}

impl OrientationStack {
    pub const MIN_THETA: usize = 4;

    /// Wrap a `[n_theta, rows, cols]` array.
    pub fn from_array(data: Array3<f64>) -> Result<Self> {
        let (n_theta, rows, cols) = data.dim();
        if n_theta < Self::MIN_THETA {
            return Err(Error::config(format!(
                "n_theta must be at least {}, got {n_theta}",
                Self::MIN_THETA
            )));
        }
        if rows < 3 || cols < 3 {
            return Err(Error::config(format!(
                "stack must be at least 3x3 spatially, got {rows}x{cols}"
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("stack contains non-finite values"));
        }
        Ok(OrientationStack { data })
    }

    pub(crate) fn from_array_unchecked(data: Array3<f64>) -> Self {
        OrientationStack { data }
    }

    pub fn zeros(rows: usize, cols: usize, n_theta: usize) -> Result<Self> {
        Self::from_array(Array3::zeros((n_theta, rows, cols)))
    }

    /// Build from `f(r, c, k)`.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        n_theta: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        Self::from_array(Array3::from_shape_fn((n_theta, rows, cols), |(k, r, c)| {
            f(r, c, k)
        }))
    }

    pub fn rows(&self) -> usize {
        self.data.dim().1
    }

    pub fn cols(&self) -> usize {
        self.data.dim().2
    }

    pub fn n_theta(&self) -> usize {
        self.data.dim().0
    }

    pub fn voxels(&self) -> usize {
        self.data.len()
    }

    pub fn get(&self, r: usize, c: usize, k: usize) -> f64 {
        self.data[[k, r, c]]
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    #[cfg(test)]
    pub(crate) fn data_mut(&mut self) -> &mut Array3<f64> {
        &mut self.data
    }

    pub fn into_array(self) -> Array3<f64> {
        self.data
    }

    pub fn fiber(&self, r: usize, c: usize) -> Vec<f64> {
        (0..self.n_theta()).map(|k| self.data[[k, r, c]]).collect()
    }

    /// Plain voxel sum, the discrete Haar volume integral.
    pub fn sum(&self) -> f64 {
        self.data.sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn clamp_unit(&mut self) {
        self.data.mapv_inplace(|v| v.clamp(0.0, 1.0));
    }

    /// Cyclically shift every fiber by `offset` slices: slice `k` moves to `k + offset`.
    pub fn shift_theta(&self, offset: usize) -> OrientationStack {
        let n = self.n_theta();
        let mut out = self.data.clone();
        for k in 0..n {
            out.index_axis_mut(ndarray::Axis(0), (k + offset) % n)
                .assign(&self.data.index_axis(ndarray::Axis(0), k));
        }
        OrientationStack { data: out }
    }

    /// Flatten in `[k, r, c]` order.
    pub fn to_vec(&self) -> Vec<f64> {
        self.data.iter().copied().collect()
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &OrientationStack, b: f64) -> OrientationStack {
        let mut out = self.data.clone();
        Zip::from(&mut out)
            .and(&other.data)
            .for_each(|o, &v| *o = a * *o + b * v);
        OrientationStack { data: out }
    }
}

/// Spatial direction used by a second-order stencil on each slice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Along the lifted level line, `cos(theta) dx + sin(theta) dy`.
    Tangent,
    /// Across the lifted level line, `-sin(theta) dx + cos(theta) dy`.
    Normal,
}

/// Per-slice coefficients of `a dxx + b dxy + c dyy`, already divided by the spacings.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct SliceCoeffs {
    xx: f64,
    yy: f64,
    /// Weight of the 4-point corner stencil (corner sum over `4 dx dy`).
    xy: f64,
}

/// A second-order operator `D^2 + weight * d_theta^2` where `D` is `X1`, `X3` or absent.
#[derive(Clone, Debug)]
pub(crate) struct Stencil {
    spec: GridSpec,
    slices: Vec<SliceCoeffs>,
    theta_weight: f64,
}

impl Stencil {
    pub(crate) fn new(spec: &GridSpec, direction: Option<Direction>, angular: f64) -> Self {
        let dx2 = spec.dx * spec.dx;
        let dy2 = spec.dy * spec.dy;
        let dxy4 = 4.0 * spec.dx * spec.dy;
        let slices = (0..spec.n_theta)
            .map(|k| {
                let (s, c) = spec.theta(k).sin_cos();
                let (a, b, cc) = match direction {
                    Some(Direction::Tangent) => (c * c, 2.0 * s * c, s * s),
                    Some(Direction::Normal) => (s * s, -2.0 * s * c, c * c),
                    None => (0.0, 0.0, 0.0),
                };
                SliceCoeffs {
                    xx: a / dx2,
                    yy: cc / dy2,
                    xy: b / dxy4,
                }
            })
            .collect();
        let dth = spec.d_theta();
        Stencil {
            spec: *spec,
            slices,
            theta_weight: angular / (dth * dth),
        }
    }

    /// Returns `L u` when `dt` is `None`, otherwise `u + dt * L u`.
    pub(crate) fn evaluate(&self, u: &OrientationStack, dt: Option<f64>) -> OrientationStack {
        let GridSpec {
            rows,
            cols,
            n_theta,
            boundary,
            ..
        } = self.spec;
        let (rm, rp) = boundary.neighbor_table(rows);
        let (cm, cp) = boundary.neighbor_table(cols);
        let src = u
            .data()
            .as_slice()
            .expect("stack storage is contiguous in standard order");
        let plane = rows * cols;
        let mut out = vec![0.0; src.len()];
        let tw = self.theta_weight;

        out.par_chunks_mut(cols).enumerate().for_each(|(line, dst)| {
            let k = line / rows;
            let r = line % rows;
            let co = self.slices[k];
            let slice = &src[k * plane..(k + 1) * plane];
            let row = |rr: usize| &slice[rr * cols..(rr + 1) * cols];
            let cur = row(r);
            let up = row(rm[r]);
            let dn = row(rp[r]);
            let kp = (k + 1) % n_theta;
            let km = (k + n_theta - 1) % n_theta;
            let next = &src[kp * plane + r * cols..kp * plane + (r + 1) * cols];
            let prev = &src[km * plane + r * cols..km * plane + (r + 1) * cols];

            let lap = |c: usize, l: usize, rr: usize| {
                let v = cur[c];
                co.xx * (cur[l] - 2.0 * v + cur[rr])
                    + co.yy * (up[c] - 2.0 * v + dn[c])
                    + co.xy * (dn[rr] - dn[l] - up[rr] + up[l])
                    + tw * (next[c] - 2.0 * v + prev[c])
            };
            let write = |dst: &mut f64, c: usize, value: f64| {
                *dst = match dt {
                    Some(dt) => cur[c] + dt * value,
                    None => value,
                };
            };
            write(&mut dst[0], 0, lap(0, cm[0], cp[0]));
            for c in 1..cols - 1 {
                write(&mut dst[c], c, lap(c, c - 1, c + 1));
            }
            let last = cols - 1;
            write(&mut dst[last], last, lap(last, cm[last], cp[last]));
        });

        OrientationStack::from_array_unchecked(
            Array3::from_shape_vec((n_theta, rows, cols), out)
                .expect("output buffer matches stack shape"),
        )
    }
}

/// Second derivative along `X1 = cos(theta) dx + sin(theta) dy`, slice by slice.
pub fn apply_x1_squared(stack: &OrientationStack, spec: &GridSpec) -> Result<OrientationStack> {
    spec.check_stack(stack)?;
    Ok(Stencil::new(spec, Some(Direction::Tangent), 0.0).evaluate(stack, None))
}

/// Second derivative along `X3 = -sin(theta) dx + cos(theta) dy`, slice by slice.
pub fn apply_x3_squared(stack: &OrientationStack, spec: &GridSpec) -> Result<OrientationStack> {
    spec.check_stack(stack)?;
    Ok(Stencil::new(spec, Some(Direction::Normal), 0.0).evaluate(stack, None))
}

/// Centered second difference along the periodic angular axis.
pub fn apply_x2_squared(stack: &OrientationStack, spec: &GridSpec) -> Result<OrientationStack> {
    if spec.n_theta < 3 {
        return Err(Error::config(format!(
            "angular second difference needs n_theta >= 3, got {}",
            spec.n_theta
        )));
    }
    spec.check_stack(stack)?;
    Ok(Stencil::new(spec, None, 1.0).evaluate(stack, None))
}

/// Residuals of the discrete bracket relation `[X1, X2] = -X3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommutatorReport {
    /// Max of `|X1 X2 f - X2 X1 f + X3 f|` over all voxels.
    pub max_residual: f64,
    /// Same, excluding the outermost spatial ring of pixels.
    pub interior_max_residual: f64,
}

/// Evaluate `X1(X2 f) - X2(X1 f) + X3 f` with centered first differences.
///
/// `field` lives on `[0, pi)`; the first-order fields are not invariant under
/// `theta -> theta + pi`, so the field is unrolled onto the full circle before
/// differentiating.
pub fn commutator_residual(field: &OrientationStack, spec: &GridSpec) -> Result<CommutatorReport> {
    spec.check_stack(field)?;
    let (rows, cols, n) = (spec.rows, spec.cols, spec.n_theta);
    let full = 2 * n;
    let dth = spec.d_theta();
    let f = Array3::from_shape_fn((full, rows, cols), |(k, r, c)| field.get(r, c, k % n));

    let (rm, rp) = spec.boundary.neighbor_table(rows);
    let (cm, cp) = spec.boundary.neighbor_table(cols);
    let ddx = |g: &Array3<f64>, k: usize, r: usize, c: usize| {
        (g[[k, r, cp[c]]] - g[[k, r, cm[c]]]) / (2.0 * spec.dx)
    };
    let ddy = |g: &Array3<f64>, k: usize, r: usize, c: usize| {
        (g[[k, rp[r], c]] - g[[k, rm[r], c]]) / (2.0 * spec.dy)
    };
    let ddt = |g: &Array3<f64>, k: usize, r: usize, c: usize| {
        (g[[(k + 1) % full, r, c]] - g[[(k + full - 1) % full, r, c]]) / (2.0 * dth)
    };
    let x1 = |g: &Array3<f64>, k: usize, r: usize, c: usize| {
        let (s, co) = (k as f64 * dth).sin_cos();
        co * ddx(g, k, r, c) + s * ddy(g, k, r, c)
    };
    let x3 = |g: &Array3<f64>, k: usize, r: usize, c: usize| {
        let (s, co) = (k as f64 * dth).sin_cos();
        -s * ddx(g, k, r, c) + co * ddy(g, k, r, c)
    };

    let x2f = Array3::from_shape_fn((full, rows, cols), |(k, r, c)| ddt(&f, k, r, c));
    let x1f = Array3::from_shape_fn((full, rows, cols), |(k, r, c)| x1(&f, k, r, c));

    let mut max_residual: f64 = 0.0;
    let mut interior_max_residual: f64 = 0.0;
    for k in 0..full {
        for r in 0..rows {
            for c in 0..cols {
                let res = x1(&x2f, k, r, c) - ddt(&x1f, k, r, c) + x3(&f, k, r, c);
                max_residual = max_residual.max(res.abs());
                if r > 0 && c > 0 && r + 1 < rows && c + 1 < cols {
                    interior_max_residual = interior_max_residual.max(res.abs());
                }
            }
        }
    }
    Ok(CommutatorReport {
        max_residual,
        interior_max_residual,
    })
}

/// Bracket sanity check on the smooth field `sin(2 pi c / cols) cos(2 theta)`.
pub fn commutator_check(spec: &GridSpec) -> Result<CommutatorReport> {
    spec.validate()?;
    let field = OrientationStack::from_fn(spec.rows, spec.cols, spec.n_theta.max(4), |_, c, k| {
        (2.0 * PI * c as f64 / spec.cols as f64).sin() * (2.0 * spec.theta(k)).cos()
    })?;
    commutator_residual(&field, spec)
}
