//! Mask-aware restoration: plain AHE and the modified AHE with WaxOn-WaxOff.

use std::collections::VecDeque;

use ndarray::Array2;

use crate::diffusion::{run_forward, DiffusionParams};
use crate::error::{Error, Result};
use crate::filters::{unsharp_r2, unsharp_se2, UnsharpParams};
use crate::grid::{GridSpec, Image2D, Mask, OrientationStack};
use crate::lift::{lift_gaussian, LiftParams, Projection};

const NEIGHBORS_4: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
const NEIGHBORS_8: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

fn offset(r: usize, c: usize, (dr, dc): (isize, isize), rows: usize, cols: usize) -> Option<(usize, usize)> {
    let rr = r as isize + dr;
    let cc = c as isize + dc;
    (rr >= 0 && cc >= 0 && (rr as usize) < rows && (cc as usize) < cols).then_some((rr as usize, cc as usize))
}

/// Fill the masked region from its boundary inward, one wave at a time.
///
/// Each wave takes every masked pixel with a known 4-neighbour and assigns the
/// mean of its known 8-neighbours, reading only the state before the wave.
pub fn fill_mask(image: &Image2D, mask: &Mask) -> Result<Image2D> {
    mask.check_matches(image)?;
    let (rows, cols) = image.dim();
    if mask.count() == rows * cols {
        return Err(Error::domain("cannot fill a fully masked image"));
    }
    let mut data = image.data().clone();
    let mut unknown = mask.data().clone();
    let mut remaining = mask.count();
    let mut front: Vec<(usize, usize)> = Vec::new();

    while remaining > 0 {
        front.clear();
        for ((r, c), &m) in unknown.indexed_iter() {
            if m && NEIGHBORS_4
                .iter()
                .filter_map(|&d| offset(r, c, d, rows, cols))
                .any(|p| !unknown[p])
            {
                front.push((r, c));
            }
        }
        let values: Vec<f64> = front
            .iter()
            .map(|&(r, c)| {
                let (sum, n) = NEIGHBORS_8
                    .iter()
                    .filter_map(|&d| offset(r, c, d, rows, cols))
                    .filter(|&p| !unknown[p])
                    .fold((0.0, 0usize), |(s, n), p| (s + data[p], n + 1));
                sum / n as f64
            })
            .collect();
        for (&p, v) in front.iter().zip(values) {
            data[p] = v;
            unknown[p] = false;
        }
        remaining -= front.len();
    }
    Image2D::from_array(data)
}

/// Keep known data outside the mask and the diffused estimate inside it.
///
/// Inside the mask the result is `(1 - alpha) current + alpha baseline`, where
/// `baseline` is usually the [`fill_mask`] output; `alpha = 0` ignores it.
pub fn advanced_average_blend(
    current: &Image2D,
    original: &Image2D,
    mask: &Mask,
    baseline: &Image2D,
    alpha: f64,
) -> Result<Image2D> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::config(format!("blend weight must lie in [0, 1], got {alpha}")));
    }
    mask.check_matches(current)?;
    mask.check_matches(original)?;
    mask.check_matches(baseline)?;
    Image2D::from_fn(current.rows(), current.cols(), |r, c| {
        if mask.get(r, c) {
            (1.0 - alpha) * current.get(r, c) + alpha * baseline.get(r, c)
        } else {
            original.get(r, c)
        }
    })
}

/// Original pixels outside the mask, `current` inside it.
pub fn advanced_average(current: &Image2D, original: &Image2D, mask: &Mask) -> Result<Image2D> {
    advanced_average_blend(current, original, mask, current, 0.0)
}

/// Remove the 4-connected contour of the mask; pixels outside the image count as unmasked.
pub fn erode_mask_4conn(mask: &Mask) -> Mask {
    let (rows, cols) = mask.dim();
    Mask::from_fn(rows, cols, |r, c| {
        mask.get(r, c)
            && NEIGHBORS_4
                .iter()
                .all(|&d| offset(r, c, d, rows, cols).is_some_and(|p| mask.data()[p]))
    })
}

/// Number of erosions needed to empty the mask.
pub fn erosion_depth(mask: &Mask) -> usize {
    let (rows, cols) = mask.dim();
    let mut depth = Array2::<usize>::zeros((rows, cols));
    let mut queue = VecDeque::new();
    for ((r, c), &m) in mask.data().indexed_iter() {
        if m && NEIGHBORS_4
            .iter()
            .any(|&d| offset(r, c, d, rows, cols).is_none_or(|p| !mask.data()[p]))
        {
            depth[[r, c]] = 1;
            queue.push_back((r, c));
        }
    }
    let mut deepest = 0;
    while let Some((r, c)) = queue.pop_front() {
        deepest = deepest.max(depth[[r, c]]);
        for &d in &NEIGHBORS_4 {
            if let Some(p) = offset(r, c, d, rows, cols) {
                if mask.data()[p] && depth[p] == 0 {
                    depth[p] = depth[[r, c]] + 1;
                    queue.push_back(p);
                }
            }
        }
    }
    deepest
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AheParams {
    /// Strong phase: forward level-line time.
    pub t1: f64,
    /// Strong phase: sharpening blur time (plain AHE: weak diffusion time).
    pub t2: f64,
    /// Weak phase: forward level-line time.
    pub t3: f64,
    /// Weak phase: sharpening blur time.
    pub t4: f64,
    /// Factor of the final planar unsharp mask.
    pub sf: f64,
    /// Std of the planar unsharp blur.
    pub sharpen_s: f64,
    /// Maximum number of outer iterations.
    pub n: usize,
    pub strong_beta: f64,
    pub weak_beta: f64,
    /// Transversal beta of the in-loop SE(2) unsharp mask.
    pub unsharp_beta: f64,
    /// Factor of the in-loop SE(2) unsharp mask.
    pub unsharp_c: f64,
    pub advanced_avg_alpha: f64,
    pub n_theta: usize,
    pub lift: LiftParams,
    pub projection: Projection,
}

impl Default for AheParams {
    fn default() -> Self {
        AheParams {
            t1: 8.0,
            t2: 1.0,
            t3: 1.0,
            t4: 0.125,
            sf: 0.5,
            sharpen_s: 1.0,
            n: 100,
            strong_beta: 0.01,
            weak_beta: 0.005,
            unsharp_beta: 2.0,
            unsharp_c: 1.0,
            advanced_avg_alpha: 0.0,
            n_theta: 32,
            lift: LiftParams {
                sigma: 1.0,
                smoothing_s: 3.0,
                ..LiftParams::default()
            },
            projection: Projection::Mean,
        }
    }
}

impl AheParams {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("t1", self.t1), ("t2", self.t2), ("t3", self.t3), ("t4", self.t4)] {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::config(format!("{name} must be a nonnegative time, got {t}")));
            }
        }
        if self.n == 0 {
            return Err(Error::config("n must be at least 1"));
        }
        if !(self.sf >= 0.0 && self.unsharp_c >= 0.0) {
            return Err(Error::config("sharpening factors must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.advanced_avg_alpha) {
            return Err(Error::config(format!(
                "advanced_avg_alpha must lie in [0, 1], got {}",
                self.advanced_avg_alpha
            )));
        }
        self.lift.validate()
    }

    fn spec(&self, image: &Image2D) -> Result<GridSpec> {
        GridSpec::new(image.rows(), image.cols(), self.n_theta)
    }
}

fn diffuse(image: &Image2D, beta: f64, t: f64, params: &AheParams, spec: &GridSpec) -> Result<OrientationStack> {
    let stack = lift_gaussian(image, &params.lift, spec)?;
    run_forward(&stack, &DiffusionParams::level_curve(beta, t), spec)
}

/// Forward level-line diffusion followed by the SE(2) unsharp mask, projected.
fn wax_phase(image: &Image2D, beta: f64, t_on: f64, t_off: f64, params: &AheParams, spec: &GridSpec) -> Result<Image2D> {
    let stack = diffuse(image, beta, t_on, params, spec)?;
    let sharpened = unsharp_se2(
        &stack,
        &UnsharpParams {
            c: params.unsharp_c,
            t_blur: t_off,
            beta: params.unsharp_beta,
        },
        spec,
    )?;
    params.projection.apply(&sharpened, params.lift.sigma)
}

/// Fill, strong diffusion for `t1`, re-impose known data, weak diffusion for `t2`.
///
/// Uses `strong_beta`, `weak_beta`, `n_theta`, `lift` and `advanced_avg_alpha`
/// from `params`; its times are ignored.
pub fn ahe(image: &Image2D, mask: &Mask, t1: f64, t2: f64, params: &AheParams) -> Result<Image2D> {
    AheParams { t1, t2, ..*params }.validate()?;
    let spec = params.spec(image)?;
    let filled = fill_mask(image, mask)?;
    let sigma = params.lift.sigma;
    let strong = params
        .projection
        .apply(&diffuse(&filled, params.strong_beta, t1, params, &spec)?, sigma)?;
    let averaged = advanced_average_blend(&strong, &filled, mask, &filled, params.advanced_avg_alpha)?;
    params
        .projection
        .apply(&diffuse(&averaged, params.weak_beta, t2, params, &spec)?, sigma)
}

/// Result of [`modified_ahe`] along with the number of outer iterations run.
#[derive(Clone, Debug)]
pub struct AheOutcome {
    pub image: Image2D,
    pub iterations: usize,
}

/// Iterated restoration with WaxOn-WaxOff phases and per-iteration mask erosion.
pub fn modified_ahe(image: &Image2D, mask: &Mask, params: &AheParams) -> Result<Image2D> {
    Ok(modified_ahe_with_report(image, mask, params)?.image)
}

pub fn modified_ahe_with_report(image: &Image2D, mask: &Mask, params: &AheParams) -> Result<AheOutcome> {
    params.validate()?;
    let spec = params.spec(image)?;
    let filled = fill_mask(image, mask)?;
    // Known data: the input outside the mask, later also pixels eroded out of it.
    let mut reference = filled.clone().into_array();
    let mut mask = mask.clone();
    let mut current = filled.clone();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let strong = wax_phase(&current, params.strong_beta, params.t1, params.t2, params, &spec)?;
        let known = Image2D::from_array(reference.clone())?;
        let averaged = advanced_average_blend(&strong, &known, &mask, &filled, params.advanced_avg_alpha)?;
        let weak = wax_phase(&averaged, params.weak_beta, params.t3, params.t4, params, &spec)?;
        current = unsharp_r2(&weak, params.sf, params.sharpen_s)?;

        let eroded = erode_mask_4conn(&mask);
        for ((r, c), &was) in mask.data().indexed_iter() {
            if was && !eroded.get(r, c) {
                reference[[r, c]] = averaged.get(r, c);
            }
        }
        mask = eroded;
        if mask.is_empty() || iterations >= params.n {
            break;
        }
    }
    Ok(AheOutcome {
        image: current,
        iterations,
    })
}
