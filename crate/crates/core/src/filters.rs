//! Enhancement built on the two sub-Laplacians: WaxOn-WaxOff and unsharp masking.

use ndarray::Array2;

use crate::diffusion::{run_forward, run_reverse, run_reverse_stepped, DiffusionParams};
use crate::error::{Error, Result};
use crate::grid::{Boundary, GridSpec, Image2D, OrientationStack};
use crate::lift::gaussian_blur;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaxParams {
    /// Level-line diffusion time per round.
    pub t_on: f64,
    /// Reverse transversal diffusion time per round.
    pub t_off: f64,
    pub beta_on: f64,
    pub beta_off: f64,
    pub iterations: usize,
    /// Number of equal reverse steps per round; `None` uses the explicit step size.
    pub reverse_steps: Option<usize>,
}

impl WaxParams {
    /// Rounds with the customary `t_off = t_on / 8`.
    pub fn new(t_on: f64, iterations: usize) -> Self {
        WaxParams {
            t_on,
            t_off: t_on / 8.0,
            beta_on: 0.25,
            beta_off: 2.0,
            iterations,
            reverse_steps: Some(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_on >= 0.0 && self.t_off >= 0.0) {
            return Err(Error::config("wax times must be nonnegative"));
        }
        if self.t_off > self.t_on {
            return Err(Error::config(format!(
                "t_off ({}) must not exceed t_on ({})",
                self.t_off, self.t_on
            )));
        }
        if self.iterations == 0 {
            return Err(Error::config("at least one WaxOn-WaxOff round is required"));
        }
        if self.reverse_steps == Some(0) {
            return Err(Error::config("reverse_steps must be at least 1"));
        }
        Ok(())
    }
}

/// Alternate forward level-line diffusion with reverse transversal diffusion.
pub fn wax_on_wax_off(
    stack: &OrientationStack,
    params: &WaxParams,
    spec: &GridSpec,
) -> Result<OrientationStack> {
    params.validate()?;
    let on = DiffusionParams::level_curve(params.beta_on, params.t_on);
    let off = DiffusionParams::transversal(params.beta_off, params.t_off);
    let mut u = stack.clone();
    for i in 0..params.iterations {
        u = run_forward(&u, &on, spec)?;
        u = match params.reverse_steps {
            Some(steps) => run_reverse_stepped(&u, &off, spec, steps),
            None => run_reverse(&u, &off, spec),
        }
        .map_err(|e| e.in_iteration(i))?;
    }
    u.clamp_unit();
    Ok(u)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnsharpParams {
    /// Sharpening factor.
    pub c: f64,
    /// Transversal blur time.
    pub t_blur: f64,
    pub beta: f64,
}

impl UnsharpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::config(format!("sharpening factor must be >= 0, got {}", self.c)));
        }
        if !(self.t_blur >= 0.0) {
            return Err(Error::config(format!("blur time must be >= 0, got {}", self.t_blur)));
        }
        Ok(())
    }
}

/// `u + C (u - u_T)` before clipping, with `u_T` the unclamped transversal blur.
pub fn unsharp_se2_raw(
    stack: &OrientationStack,
    params: &UnsharpParams,
    spec: &GridSpec,
) -> Result<OrientationStack> {
    params.validate()?;
    if params.c == 0.0 || params.t_blur == 0.0 {
        spec.check_stack(stack)?;
        return Ok(stack.clone());
    }
    let blur = DiffusionParams::transversal(params.beta, params.t_blur).with_clamp(false);
    let blurred = run_forward(stack, &blur, spec)?;
    Ok(stack.lin_comb(1.0 + params.c, &blurred, -params.c))
}

/// Unsharp masking on the orientation stack, blurring across level lines.
pub fn unsharp_se2(
    stack: &OrientationStack,
    params: &UnsharpParams,
    spec: &GridSpec,
) -> Result<OrientationStack> {
    let mut out = unsharp_se2_raw(stack, params, spec)?;
    out.clamp_unit();
    Ok(out)
}

/// Classical unsharp masking `I + C (I - I * G_s)`, clamped.
pub fn unsharp_r2(image: &Image2D, c: f64, s: f64) -> Result<Image2D> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::config(format!("blur std must be nonnegative, got {s}")));
    }
    if !c.is_finite() {
        return Err(Error::config("sharpening factor must be finite"));
    }
    let blurred = gaussian_blur(image.data(), s);
    let data = image.data();
    Image2D::from_array(data + &((data - &blurred) * c))
}

/// Correlate with a 3x3 kernel under mirrored borders; no clipping.
pub fn convolve3x3(data: &Array2<f64>, kernel: &[[f64; 3]; 3]) -> Array2<f64> {
    let (rows, cols) = data.dim();
    let b = Boundary::Reflect;
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        let mut acc = 0.0;
        for (i, krow) in kernel.iter().enumerate() {
            for (j, w) in krow.iter().enumerate() {
                let rr = b.resolve(r as isize + i as isize - 1, rows);
                let cc = b.resolve(c as isize + j as isize - 1, cols);
                acc += w * data[[rr, cc]];
            }
        }
        acc
    })
}

/// Cross-shaped neighbourhood sum (center plus 4-neighbours).
const CROSS: [[f64; 3]; 3] = [[0.0, 1.0, 0.0], [1.0, 1.0, 1.0], [0.0, 1.0, 0.0]];
const IDENTITY: [[f64; 3]; 3] = [[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]];

/// The 3x3 kernel `delta + C (delta - CROSS / C)`.
pub fn unsharp_kernel3(c: f64) -> [[f64; 3]; 3] {
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = IDENTITY[i][j] + c * (IDENTITY[i][j] - CROSS[i][j] / c);
        }
    }
    k
}

/// `I + C (I - B I)` where `B` sums the cross neighbourhood scaled by `1 / C`.
pub fn unsharp_cross3(data: &Array2<f64>, c: f64) -> Array2<f64> {
    let blurred = convolve3x3(data, &CROSS) / c;
    data + &((data - &blurred) * c)
}
