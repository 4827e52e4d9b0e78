use crate::error::{Error, Result};
use crate::grid::Image2D;
use crate::lift::image_gradient;

/// Per-image statistics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImageStats {
    pub rms_contrast: f64,
    pub gradient_energy: f64,
    pub mass: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    /// Peak signal-to-noise ratio in dB, peak value 1; `+inf` for identical images.
    pub psnr: f64,
    pub first: ImageStats,
    pub second: ImageStats,
}

pub fn psnr(a: &Image2D, b: &Image2D) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::config(format!(
            "cannot compare images of shape {:?} and {:?}",
            a.dim(),
            b.dim()
        )));
    }
    let mse = (a.data() - b.data()).mapv(|d| d * d).mean().unwrap_or(0.0);
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    })
}

/// Standard deviation of the intensities.
pub fn rms_contrast(image: &Image2D) -> f64 {
    // Shifted by the first pixel so flat images give exactly zero.
    let shift = image.get(0, 0);
    let n = (image.rows() * image.cols()) as f64;
    let (s, s2) = image.data().iter().fold((0.0, 0.0), |(s, s2), &v| {
        let d = v - shift;
        (s + d, s2 + d * d)
    });
    (s2 / n - (s / n).powi(2)).max(0.0).sqrt()
}

/// Sum of squared centered-difference gradient magnitudes.
pub fn gradient_energy(image: &Image2D) -> f64 {
    let (gx, gy) = image_gradient(image.data(), 1.0, 1.0);
    gx.iter().zip(gy.iter()).map(|(x, y)| x * x + y * y).sum()
}

pub fn stats(image: &Image2D) -> ImageStats {
    ImageStats {
        rms_contrast: rms_contrast(image),
        gradient_energy: gradient_energy(image),
        mass: image.data().sum(),
    }
}

pub fn compute_metrics(a: &Image2D, b: &Image2D) -> Result<Metrics> {
    Ok(Metrics {
        psnr: psnr(a, b)?,
        first: stats(a),
        second: stats(b),
    })
}
