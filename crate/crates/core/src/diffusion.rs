//! Explicit time stepping of the hypoelliptic heat equation on the orientation stack.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{Direction, GridSpec, OrientationStack, Stencil};

/// Which sub-Laplacian drives the flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    /// `X1^2 + beta X2^2`: diffusion along lifted level lines.
    LevelCurve,
    /// `X3^2 + beta X2^2`: diffusion across them.
    Transversal,
}

impl OperatorKind {
    fn direction(self) -> Direction {
        match self {
            OperatorKind::LevelCurve => Direction::Tangent,
            OperatorKind::Transversal => Direction::Normal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeStep {
    /// `0.9` times the stability bound.
    Auto,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionParams {
    pub operator: OperatorKind,
    pub beta: f64,
    pub total_time: f64,
    pub dt: TimeStep,
    /// Clip to `[0, 1]` after every forward step. Reverse steps always clip.
    pub clamp: bool,
    /// Reverse-time runs abort once the per-step increment has grown by this factor.
    pub blowup_factor: f64,
}

/// Fraction of the stability bound used by [`TimeStep::Auto`].
pub const AUTO_DT_FRACTION: f64 = 0.9;

impl DiffusionParams {
    pub fn new(operator: OperatorKind, beta: f64, total_time: f64) -> Self {
        DiffusionParams {
            operator,
            beta,
            total_time,
            dt: TimeStep::Auto,
            clamp: true,
            blowup_factor: 10.0,
        }
    }

    pub fn level_curve(beta: f64, total_time: f64) -> Self {
        Self::new(OperatorKind::LevelCurve, beta, total_time)
    }

    pub fn transversal(beta: f64, total_time: f64) -> Self {
        Self::new(OperatorKind::Transversal, beta, total_time)
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = TimeStep::Fixed(dt);
        self
    }

    pub fn with_clamp(mut self, clamp: bool) -> Self {
        self.clamp = clamp;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::config(format!("beta must be nonnegative, got {}", self.beta)));
        }
        if !(self.total_time >= 0.0 && self.total_time.is_finite()) {
            return Err(Error::config(format!(
                "total time must be nonnegative, got {}",
                self.total_time
            )));
        }
        if let TimeStep::Fixed(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::config(format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.blowup_factor > 1.0) {
            return Err(Error::config(format!(
                "blowup factor must exceed 1, got {}",
                self.blowup_factor
            )));
        }
        Ok(())
    }

    /// Largest explicit step covering the axis, cross and angular terms.
    pub fn stability_bound(&self, spec: &GridSpec) -> f64 {
        let spatial = 1.0 / (spec.dx * spec.dx)
            + 1.0 / (spec.dy * spec.dy)
            + 1.0 / (spec.dx * spec.dy);
        let dth = spec.d_theta();
        1.0 / (2.0 * spatial + 2.0 * self.beta / (dth * dth))
    }

    /// Step size in use, checked against the stability bound.
    pub fn resolved_dt(&self, spec: &GridSpec) -> Result<f64> {
        self.validate()?;
        let bound = self.stability_bound(spec);
        match self.dt {
            TimeStep::Auto => Ok(AUTO_DT_FRACTION * bound),
            TimeStep::Fixed(dt) if dt > bound * (1.0 + 1e-12) => Err(Error::config(format!(
                "dt = {dt} exceeds the stability bound {bound}"
            ))),
            TimeStep::Fixed(dt) => Ok(dt),
        }
    }

    pub(crate) fn stencil(&self, spec: &GridSpec) -> Stencil {
        Stencil::new(spec, Some(self.operator.direction()), self.beta)
    }
}

/// Number of steps and the length of the final (possibly shortened) one.
fn schedule(total: f64, dt: f64) -> (usize, f64) {
    if total <= 0.0 {
        return (0, 0.0);
    }
    let n = ((total / dt) - 1e-9).ceil().max(1.0) as usize;
    let last = total - (n - 1) as f64 * dt;
    (n, last)
}

/// `L u` for the operator selected in `params`.
pub fn apply_operator(
    stack: &OrientationStack,
    params: &DiffusionParams,
    spec: &GridSpec,
) -> Result<OrientationStack> {
    params.validate()?;
    spec.check_stack(stack)?;
    Ok(params.stencil(spec).evaluate(stack, None))
}

/// One explicit Euler step `u + dt L u`.
pub fn step_forward(
    stack: &OrientationStack,
    params: &DiffusionParams,
    spec: &GridSpec,
) -> Result<OrientationStack> {
    spec.check_stack(stack)?;
    let dt = params.resolved_dt(spec)?;
    let mut out = params.stencil(spec).evaluate(stack, Some(dt));
    if params.clamp {
        out.clamp_unit();
    }
    Ok(out)
}

/// Integrate forward to `params.total_time`, shortening the last step to land on it.
pub fn run_forward(
    stack: &OrientationStack,
    params: &DiffusionParams,
    spec: &GridSpec,
) -> Result<OrientationStack> {
    spec.check_stack(stack)?;
    let dt = params.resolved_dt(spec)?;
    let (steps, last) = schedule(params.total_time, dt);
    let stencil = params.stencil(spec);
    let mut u = stack.clone();
    for i in 0..steps {
        let h = if i + 1 == steps { last } else { dt };
        u = stencil.evaluate(&u, Some(h));
        if params.clamp {
            u.clamp_unit();
        }
    }
    Ok(u)
}

/// Reverse step `u - h L u`, clipped. Returns the new state and `h * max |L u|`.
fn reverse_step(
    stencil: &Stencil,
    u: &OrientationStack,
    h: f64,
    step: usize,
) -> Result<(OrientationStack, f64)> {
    let mut out = stencil.evaluate(u, Some(-h));
    let mut increment: f64 = 0.0;
    for (new, old) in out.data().iter().zip(u.data().iter()) {
        let d = (new - old).abs();
        if !d.is_finite() {
            return Err(Error::Blowup {
                step,
                iteration: None,
                detail: "non-finite value in reverse step".into(),
            });
        }
        increment = increment.max(d);
    }
    out.clamp_unit();
    Ok((out, increment))
}

/// One regularized reverse-time step `clip(u - dt L u)`.
pub fn step_reverse(
    stack: &OrientationStack,
    params: &DiffusionParams,
    spec: &GridSpec,
) -> Result<OrientationStack> {
    spec.check_stack(stack)?;
    let dt = params.resolved_dt(spec)?;
    reverse_step(&params.stencil(spec), stack, dt, 0).map(|(u, _)| u)
}

/// Reverse-time integration to `params.total_time`.
///
/// The run aborts with [`Error::Blowup`] once the size of a step's update
/// exceeds `blowup_factor` times that of the first step: smooth data barely
/// changes its update size over short reverse times, while amplified
/// high-frequency content grows it geometrically.
pub fn run_reverse(
    stack: &OrientationStack,
    params: &DiffusionParams,
    spec: &GridSpec,
) -> Result<OrientationStack> {
    spec.check_stack(stack)?;
    let dt = params.resolved_dt(spec)?;
    let (steps, last) = schedule(params.total_time, dt);
    reverse_loop(stack, params, spec, steps, dt, last)
}

/// Reverse-time integration in exactly `steps` equal steps, ignoring `params.dt`.
///
/// The explicit stability bound does not apply backwards in time, where every
/// step amplifies the top spatial frequencies by `1 + h |lambda_max|`. A few
/// long steps therefore bound the amplification by that of a single
/// unsharp mask, whereas many short steps compound it.
pub fn run_reverse_stepped(
    stack: &OrientationStack,
    params: &DiffusionParams,
    spec: &GridSpec,
    steps: usize,
) -> Result<OrientationStack> {
    spec.check_stack(stack)?;
    params.validate()?;
    if steps == 0 {
        return Err(Error::config("reverse run needs at least one step"));
    }
    if params.total_time == 0.0 {
        return Ok(stack.clone());
    }
    let h = params.total_time / steps as f64;
    reverse_loop(stack, params, spec, steps, h, h)
}

fn reverse_loop(
    stack: &OrientationStack,
    params: &DiffusionParams,
    spec: &GridSpec,
    steps: usize,
    dt: f64,
    last: f64,
) -> Result<OrientationStack> {
    let stencil = params.stencil(spec);
    let mut u = stack.clone();
    let mut first = None;
    for i in 0..steps {
        let h = if i + 1 == steps { last } else { dt };
        let (next, increment) = reverse_step(&stencil, &u, h, i)?;
        // Normalize by step length so the shortened last step compares fairly.
        let rate = increment / h;
        let reference = *first.get_or_insert(rate);
        if rate > params.blowup_factor * reference && rate > 0.0 {
            return Err(Error::Blowup {
                step: i,
                iteration: None,
                detail: format!(
                    "update size grew {:.3e}x over the first step (limit {})",
                    rate / reference,
                    params.blowup_factor
                ),
            });
        }
        u = next;
    }
    Ok(u)
}

/// Largest voxel count accepted by [`assemble_dense_operator`].
pub const DENSE_VOXEL_LIMIT: usize = 4096;

/// Dense matrix of the selected operator acting on the flattened `[k, r, c]` stack.
///
/// Built entry by entry from the stencil definition; intended as a test oracle.
pub fn assemble_dense_operator(params: &DiffusionParams, spec: &GridSpec) -> Result<Array2<f64>> {
    params.validate()?;
    spec.validate()?;
    let n = spec.voxels();
    if n > DENSE_VOXEL_LIMIT {
        return Err(Error::config(format!(
            "dense assembly limited to {DENSE_VOXEL_LIMIT} voxels, grid has {n}"
        )));
    }
    let (rows, cols, nt) = (spec.rows, spec.cols, spec.n_theta);
    let index = |k: usize, r: usize, c: usize| (k * rows + r) * cols + c;
    let dth2 = spec.d_theta() * spec.d_theta();
    let mut m = Array2::zeros((n, n));
    for k in 0..nt {
        let (s, co) = spec.theta(k).sin_cos();
        let (a, b, c2) = match params.operator {
            OperatorKind::LevelCurve => (co * co, 2.0 * s * co, s * s),
            OperatorKind::Transversal => (s * s, -2.0 * s * co, co * co),
        };
        let wx = a / (spec.dx * spec.dx);
        let wy = c2 / (spec.dy * spec.dy);
        let wxy = b / (4.0 * spec.dx * spec.dy);
        let wt = params.beta / dth2;
        for r in 0..rows {
            for c in 0..cols {
                let row = index(k, r, c);
                let mut add = |dk: isize, dr: isize, dc: isize, w: f64| {
                    let kk = (k as isize + dk).rem_euclid(nt as isize) as usize;
                    let rr = spec.boundary.resolve(r as isize + dr, rows);
                    let cc = spec.boundary.resolve(c as isize + dc, cols);
                    m[[row, index(kk, rr, cc)]] += w;
                };
                add(0, 0, -1, wx);
                add(0, 0, 1, wx);
                add(0, 0, 0, -2.0 * wx);
                add(0, -1, 0, wy);
                add(0, 1, 0, wy);
                add(0, 0, 0, -2.0 * wy);
                add(0, 1, 1, wxy);
                add(0, -1, -1, wxy);
                add(0, 1, -1, -wxy);
                add(0, -1, 1, -wxy);
                add(-1, 0, 0, wt);
                add(1, 0, 0, wt);
                add(0, 0, 0, -2.0 * wt);
            }
        }
    }
    Ok(m)
}
