//! Lifting images to orientation stacks and projecting them back.

use ndarray::{Array2, Array3, Axis};

use crate::error::{Error, Result};
use crate::grid::{Boundary, GridSpec, Image2D, OrientationStack};

/// Parameters of the Gaussian lift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiftParams {
    /// Angular spread of the fiber profile.
    pub sigma: f64,
    /// Std of the Gaussian applied before estimating level-line directions.
    pub smoothing_s: f64,
    /// Relative gradient magnitude below which a pixel has no defined orientation.
    pub gradient_floor: f64,
}

impl Default for LiftParams {
    fn default() -> Self {
        LiftParams {
            sigma: 2.0,
            smoothing_s: 1.0,
            gradient_floor: 1e-3,
        }
    }
}

impl LiftParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.smoothing_s >= 0.0 && self.smoothing_s.is_finite()) {
            return Err(Error::config(format!(
                "smoothing_s must be nonnegative, got {}",
                self.smoothing_s
            )));
        }
        if !(self.gradient_floor > 0.0 && self.gradient_floor < 1.0) {
            return Err(Error::config(format!(
                "gradient_floor must lie in (0, 1), got {}",
                self.gradient_floor
            )));
        }
        Ok(())
    }
}

/// Normalized 1-D Gaussian taps, truncated at four standard deviations.
pub(crate) fn gaussian_kernel(s: f64) -> Vec<f64> {
    let radius = (4.0 * s).ceil().max(1.0) as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * s * s)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    taps
}

/// Separable Gaussian convolution of a raw array with mirrored borders.
pub(crate) fn gaussian_blur(data: &Array2<f64>, s: f64) -> Array2<f64> {
    if s == 0.0 {
        return data.clone();
    }
    let taps = gaussian_kernel(s);
    let radius = (taps.len() / 2) as isize;
    let (rows, cols) = data.dim();
    let b = Boundary::Reflect;
    let horizontal = Array2::from_shape_fn((rows, cols), |(r, c)| {
        taps.iter()
            .enumerate()
            .map(|(i, w)| w * data[[r, b.resolve(c as isize + i as isize - radius, cols)]])
            .sum::<f64>()
    });
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        taps.iter()
            .enumerate()
            .map(|(i, w)| w * horizontal[[b.resolve(r as isize + i as isize - radius, rows), c]])
            .sum::<f64>()
    })
}

/// Isotropic Gaussian smoothing with std `s` pixels; `s = 0` is the identity.
pub fn preprocess_gaussian(image: &Image2D, s: f64) -> Result<Image2D> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::config(format!("smoothing std must be nonnegative, got {s}")));
    }
    if s == 0.0 {
        return Ok(image.clone());
    }
    Image2D::from_array(gaussian_blur(image.data(), s))
}

/// Centered-difference gradient `(d/dx, d/dy)` with mirrored borders.
pub fn image_gradient(data: &Array2<f64>, dx: f64, dy: f64) -> (Array2<f64>, Array2<f64>) {
    let (rows, cols) = data.dim();
    let (rm, rp) = Boundary::Reflect.neighbor_table(rows);
    let (cm, cp) = Boundary::Reflect.neighbor_table(cols);
    let gx = Array2::from_shape_fn((rows, cols), |(r, c)| {
        (data[[r, cp[c]]] - data[[r, cm[c]]]) / (2.0 * dx)
    });
    let gy = Array2::from_shape_fn((rows, cols), |(r, c)| {
        (data[[rp[r], c]] - data[[rm[r], c]]) / (2.0 * dy)
    });
    (gx, gy)
}

fn check_image(image: &Image2D, spec: &GridSpec) -> Result<()> {
    spec.validate()?;
    if image.dim() != (spec.rows, spec.cols) {
        return Err(Error::config(format!(
            "image is {:?} but grid spec is {}x{}",
            image.dim(),
            spec.rows,
            spec.cols
        )));
    }
    if spec.n_theta < OrientationStack::MIN_THETA {
        return Err(Error::config(format!(
            "n_theta must be at least {}",
            OrientationStack::MIN_THETA
        )));
    }
    Ok(())
}

/// Gaussian lift: each fiber is `I * exp(-<g, e_theta>^2 / (2 sigma^2))` with `g`
/// the unit gradient, so the profile peaks on the level-line direction.
///
/// Directions come from the image smoothed with `params.smoothing_s`; the
/// intensities are those of `image` itself. Pixels whose gradient is below
/// `gradient_floor * max |grad I|` get the uniform fiber `I`.
pub fn lift_gaussian(
    image: &Image2D,
    params: &LiftParams,
    spec: &GridSpec,
) -> Result<OrientationStack> {
    params.validate()?;
    check_image(image, spec)?;
    let smoothed = gaussian_blur(image.data(), params.smoothing_s);
    let (gx, gy) = image_gradient(&smoothed, spec.dx, spec.dy);
    let norm = Array2::from_shape_fn(gx.dim(), |(r, c)| gx[[r, c]].hypot(gy[[r, c]]));
    let floor = params.gradient_floor * norm.iter().fold(0.0_f64, |m, &v| m.max(v));
    let two_var = 2.0 * params.sigma * params.sigma;
    let trig: Vec<(f64, f64)> = (0..spec.n_theta).map(|k| spec.theta(k).sin_cos()).collect();

    let data = Array3::from_shape_fn((spec.n_theta, spec.rows, spec.cols), |(k, r, c)| {
        let i = image.get(r, c);
        let g = norm[[r, c]];
        if g <= floor || g == 0.0 {
            return i;
        }
        let (s, co) = trig[k];
        let along = (gx[[r, c]] * co + gy[[r, c]] * s) / g;
        i * (-(along * along) / two_var).exp()
    });
    OrientationStack::from_array(data)
}

/// One-hot lift: the whole intensity sits on the angle maximizing `|X3 I|`.
///
/// Ties go to the lowest angle index; pixels with zero gradient get a zero fiber.
pub fn lift_dirac(image: &Image2D, spec: &GridSpec) -> Result<OrientationStack> {
    check_image(image, spec)?;
    let (gx, gy) = image_gradient(image.data(), spec.dx, spec.dy);
    let trig: Vec<(f64, f64)> = (0..spec.n_theta).map(|k| spec.theta(k).sin_cos()).collect();
    let mut data = Array3::zeros((spec.n_theta, spec.rows, spec.cols));
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let (ix, iy) = (gx[[r, c]], gy[[r, c]]);
            if ix == 0.0 && iy == 0.0 {
                continue;
            }
            let mut best = 0;
            let mut best_val = f64::NEG_INFINITY;
            for (k, &(s, co)) in trig.iter().enumerate() {
                let v = (-s * ix + co * iy).abs();
                if v > best_val {
                    best = k;
                    best_val = v;
                }
            }
            data[[best, r, c]] = image.get(r, c);
        }
    }
    OrientationStack::from_array(data)
}

/// Fiber maximum, clamped to `[0, 1]`.
pub fn project_max(stack: &OrientationStack) -> Image2D {
    let max = stack
        .data()
        .fold_axis(Axis(0), f64::NEG_INFINITY, |&m, &v| m.max(v));
    Image2D::from_array(max).expect("projection of a valid stack is a valid image")
}

/// Fiber mean of the Gaussian lift profile at `n` equispaced angles.
///
/// Independent of the level-line direction up to terms of order
/// `(1 / (8 sigma^2))^n / n!`.
pub fn gaussian_profile_mean(sigma: f64, n_theta: usize) -> f64 {
    let n = n_theta as f64;
    (0..n_theta)
        .map(|k| {
            let c = (k as f64 * std::f64::consts::PI / n).cos();
            (-(c * c) / (2.0 * sigma * sigma)).exp()
        })
        .sum::<f64>()
        / n
}

/// Normalized fiber integral: the fiber mean divided by [`gaussian_profile_mean`], clamped.
///
/// Inverts [`lift_gaussian`] on pixels with a defined gradient and, being
/// linear, does not favour positive over negative perturbations of the stack
/// the way the maximum does. Flat fibers come back scaled by `1 / mean`.
pub fn project_mean(stack: &OrientationStack, sigma: f64) -> Result<Image2D> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::config(format!("sigma must be positive, got {sigma}")));
    }
    let m = gaussian_profile_mean(sigma, stack.n_theta());
    let mean = stack
        .data()
        .mean_axis(Axis(0))
        .expect("stack has at least one angle");
    Image2D::from_array(mean / m)
}

/// Choice of fiber-to-pixel map.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Projection {
    #[default]
    Max,
    /// [`project_mean`].
    Mean,
    /// [`project_log_mean`].
    LogMean,
}

impl Projection {
    pub fn name(self) -> &'static str {
        match self {
            Projection::Max => "max",
            Projection::Mean => "mean",
            Projection::LogMean => "log-mean",
        }
    }

    /// Project with `sigma` being the spread of the lift that produced the stack.
    pub fn apply(self, stack: &OrientationStack, sigma: f64) -> Result<Image2D> {
        match self {
            Projection::Max => Ok(project_max(stack)),
            Projection::Mean => project_mean(stack, sigma),
            Projection::LogMean => project_log_mean(stack, sigma),
        }
    }
}

impl std::str::FromStr for Projection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Projection::Max),
            "mean" => Ok(Projection::Mean),
            "log-mean" => Ok(Projection::LogMean),
            other => Err(Error::config(format!(
                "unknown projection '{other}', expected max, mean or log-mean"
            ))),
        }
    }
}

/// Additive constant of the log-mean projection that undoes the Gaussian lift.
pub fn inversion_constant(sigma: f64) -> f64 {
    1.0 / (4.0 * sigma * sigma)
}

/// Smallest value fed to the logarithm.
const LOG_FLOOR: f64 = 1e-12;

/// Log-mean projection `exp(1/(4 sigma^2) + mean_k ln u(theta_k))`, clamped.
///
/// Exact inverse of [`lift_gaussian`] on pixels with a defined gradient, since
/// the fiber average of `cos^2` over equispaced angles is exactly 1/2.
pub fn project_log_mean(stack: &OrientationStack, sigma: f64) -> Result<Image2D> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::config(format!("sigma must be positive, got {sigma}")));
    }
    let n = stack.n_theta();
    let k_sigma = inversion_constant(sigma);
    let mut out = Array2::zeros((stack.rows(), stack.cols()));
    for ((k, r, c), &v) in stack.data().indexed_iter() {
        if v <= 0.0 {
            return Err(Error::domain(format!(
                "log-mean projection needs a positive stack; pixel ({r}, {c}) has value {v} at angle index {k}"
            )));
        }
        out[[r, c]] += v.max(LOG_FLOOR).ln();
    }
    out.mapv_inplace(|s: f64| (k_sigma + s / n as f64).exp());
    Image2D::from_array(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ramp(rows: usize, cols: usize) -> Image2D {
        Image2D::from_fn(rows, cols, |_, c| c as f64 / cols as f64).unwrap()
    }

    #[test]
    fn zero_smoothing_is_identity() {
        let img = ramp(8, 8);
        assert_eq!(preprocess_gaussian(&img, 0.0).unwrap(), img);
    }

    #[test]
    fn smoothing_preserves_constants() {
        let img = Image2D::constant(9, 11, 0.4).unwrap();
        let out = preprocess_gaussian(&img, 2.5).unwrap();
        assert!(out.data().iter().all(|v| (v - 0.4).abs() < 1e-14));
    }

    #[test]
    fn ramp_lift_matches_closed_form() {
        let img = ramp(10, 12);
        let spec = GridSpec::new(10, 12, 16).unwrap();
        let p = LiftParams {
            sigma: 0.7,
            smoothing_s: 0.0,
            gradient_floor: 1e-3,
        };
        let st = lift_gaussian(&img, &p, &spec).unwrap();
        for k in 0..16 {
            let t = spec.theta(k);
            let want = img.get(4, 5) * (-(t.cos().powi(2)) / (2.0 * 0.49)).exp();
            assert!((st.get(4, 5, k) - want).abs() < 1e-14);
        }
        let fiber = st.fiber(4, 5);
        let argmax = (0..16).max_by(|&a, &b| fiber[a].total_cmp(&fiber[b])).unwrap();
        assert!((spec.theta(argmax) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn huge_sigma_gives_flat_fibers() {
        let img = ramp(6, 6);
        let spec = GridSpec::new(6, 6, 8).unwrap();
        let p = LiftParams {
            sigma: 1e6,
            ..LiftParams::default()
        };
        let st = lift_gaussian(&img, &p, &spec).unwrap();
        for ((_, r, c), &v) in st.data().indexed_iter() {
            assert!((v - img.get(r, c)).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_image_lifts_uniformly_or_to_zero() {
        let img = Image2D::constant(5, 5, 0.3).unwrap();
        let spec = GridSpec::new(5, 5, 8).unwrap();
        let g = lift_gaussian(&img, &LiftParams::default(), &spec).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.3));
        let d = lift_dirac(&img, &spec).unwrap();
        assert!(d.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dirac_ramp_sits_at_right_angle() {
        let img = Image2D::from_fn(7, 9, |_, c| (c + 1) as f64 / 10.0).unwrap();
        let spec = GridSpec::new(7, 9, 8).unwrap();
        let st = lift_dirac(&img, &spec).unwrap();
        for r in 0..7 {
            for c in 0..9 {
                assert_eq!(st.fiber(r, c).iter().filter(|&&v| v != 0.0).count(), 1);
                assert_eq!(st.get(r, c, 4), img.get(r, c));
            }
        }
    }

    #[test]
    fn log_mean_rejects_nonpositive_values() {
        let mut st = OrientationStack::from_fn(4, 4, 4, |_, _, _| 0.5).unwrap();
        st.data_mut()[[2, 1, 3]] = 0.0;
        let err = project_log_mean(&st, 1.0).unwrap_err();
        assert!(matches!(err, Error::Domain(ref m) if m.contains("(1, 3)")));
    }

    #[test]
    fn log_mean_of_flat_fiber_scales_by_constant() {
        let st = OrientationStack::from_fn(4, 4, 6, |_, _, _| 0.25).unwrap();
        let out = project_log_mean(&st, 1.5).unwrap();
        let want = 0.25 * inversion_constant(1.5).exp();
        assert!(out.data().iter().all(|v| (v - want).abs() < 1e-14));
    }

    #[test]
    fn mean_projection_inverts_the_lift() {
        let img = Image2D::from_fn(12, 12, |r, c| 0.2 + 0.03 * c as f64 + 0.01 * r as f64).unwrap();
        let spec = GridSpec::new(12, 12, 16).unwrap();
        let p = LiftParams {
            sigma: 0.8,
            smoothing_s: 0.0,
            ..LiftParams::default()
        };
        let st = lift_gaussian(&img, &p, &spec).unwrap();
        let back = project_mean(&st, 0.8).unwrap();
        for (a, b) in back.data().iter().zip(img.data().iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn projection_names_parse() {
        for p in [Projection::Max, Projection::Mean, Projection::LogMean] {
            assert_eq!(p.name().parse::<Projection>().unwrap(), p);
        }
    }

    #[test]
    fn invalid_lift_params_are_rejected() {
        let bad = LiftParams {
            gradient_floor: 1.5,
            ..LiftParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = LiftParams {
            sigma: 0.0,
            ..LiftParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
