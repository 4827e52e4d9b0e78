//! Deterministic synthetic test scenes.
//!
//! All fixtures use the dark-on-light convention: ink is 1, background 0.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Image2D, Mask};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixtureKind {
    /// Annulus with two opposed angular gaps.
    BrokenCircle,
    /// Two collinear segments separated by a gap.
    BrokenLines,
    /// Oblique sinusoidal stripes under seeded uniform corruption.
    Stripes,
    /// Linear ramp plus a shallow bump; the gradient never vanishes.
    RampBump,
}

impl FixtureKind {
    pub const ALL: [FixtureKind; 4] = [
        FixtureKind::BrokenCircle,
        FixtureKind::BrokenLines,
        FixtureKind::Stripes,
        FixtureKind::RampBump,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FixtureKind::BrokenCircle => "broken-circle",
            FixtureKind::BrokenLines => "broken-lines",
            FixtureKind::Stripes => "stripes",
            FixtureKind::RampBump => "ramp-bump",
        }
    }
}

impl fmt::Display for FixtureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FixtureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FixtureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown fixture '{s}', expected one of broken-circle, broken-lines, stripes, ramp-bump"
                ))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixtureOptions {
    pub size: usize,
    /// Fraction of corrupted pixels for the stripes fixture.
    pub density: f64,
    pub seed: u64,
}

impl FixtureOptions {
    pub fn new(size: usize) -> Self {
        FixtureOptions {
            size,
            density: 0.95,
            seed: 7,
        }
    }
}

/// A corrupted scene together with its mask and ground truth.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub kind: FixtureKind,
    pub image: Image2D,
    pub mask: Mask,
    pub truth: Image2D,
}

/// Geometry of the broken-circle fixture, exposed so tests can locate the gaps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircleGeometry {
    pub center: f64,
    pub radius: f64,
    pub half_width: f64,
    /// Half opening angle of each gap.
    pub gap_half_angle: f64,
}

impl CircleGeometry {
    pub fn for_size(size: usize) -> Self {
        let radius = 0.3 * size as f64;
        CircleGeometry {
            center: (size as f64 - 1.0) / 2.0,
            radius,
            half_width: (size as f64 / 40.0).max(1.2),
            gap_half_angle: (size as f64 / 20.0) / radius,
        }
    }

    pub fn on_ring(&self, r: usize, c: usize) -> bool {
        let (dy, dx) = (r as f64 - self.center, c as f64 - self.center);
        (dx.hypot(dy) - self.radius).abs() <= self.half_width
    }

    /// Angularly inside one of the two gaps (at angle 0 and pi).
    pub fn in_gap(&self, r: usize, c: usize) -> bool {
        let (dy, dx) = (r as f64 - self.center, c as f64 - self.center);
        let phi = dy.atan2(dx).abs();
        phi <= self.gap_half_angle || PI - phi <= self.gap_half_angle
    }
}

/// Geometry of the broken-lines fixture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinesGeometry {
    pub row: f64,
    pub half_width: f64,
    pub start: f64,
    pub end: f64,
    pub gap_start: f64,
    pub gap_end: f64,
}

impl LinesGeometry {
    pub fn for_size(size: usize) -> Self {
        let s = size as f64;
        let mid = (s - 1.0) / 2.0;
        let half_gap = s / 16.0;
        LinesGeometry {
            row: mid,
            half_width: (s / 40.0).max(1.2),
            start: 0.15 * s,
            end: 0.85 * s,
            gap_start: mid - half_gap,
            gap_end: mid + half_gap,
        }
    }

    pub fn on_line(&self, r: usize, c: usize) -> bool {
        let c = c as f64;
        (r as f64 - self.row).abs() <= self.half_width && c >= self.start && c <= self.end
    }

    pub fn in_gap(&self, c: usize) -> bool {
        let c = c as f64;
        c >= self.gap_start && c <= self.gap_end
    }
}

pub const STRIPE_ANGLE: f64 = PI / 6.0;

fn stripe_period(size: usize) -> f64 {
    (size as f64 / 4.0).max(8.0)
}

fn seeded_mask(rows: usize, cols: usize, density: f64, seed: u64) -> Result<Mask> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::config(format!("density must lie in [0, 1], got {density}")));
    }
    let total = rows * cols;
    let count = (density * total as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = Mask::empty(rows, cols);
    for i in index::sample(&mut rng, total, count) {
        mask.set(i / cols, i % cols, true);
    }
    Ok(mask)
}

pub fn make_fixture(kind: FixtureKind, opts: &FixtureOptions) -> Result<Fixture> {
    let n = opts.size;
    if n < 32 {
        return Err(Error::config(format!("fixture size must be at least 32, got {n}")));
    }
    let fixture = match kind {
        FixtureKind::BrokenCircle => {
            let g = CircleGeometry::for_size(n);
            let truth = Image2D::from_fn(n, n, |r, c| if g.on_ring(r, c) { 1.0 } else { 0.0 })?;
            let mask = Mask::from_fn(n, n, |r, c| g.on_ring(r, c) && g.in_gap(r, c));
            let image = Image2D::from_fn(n, n, |r, c| {
                if mask.get(r, c) {
                    0.0
                } else {
                    truth.get(r, c)
                }
            })?;
            Fixture {
                kind,
                image,
                mask,
                truth,
            }
        }
        FixtureKind::BrokenLines => {
            let g = LinesGeometry::for_size(n);
            let truth = Image2D::from_fn(n, n, |r, c| if g.on_line(r, c) { 1.0 } else { 0.0 })?;
            let mask = Mask::from_fn(n, n, |r, c| g.on_line(r, c) && g.in_gap(c));
            let image = Image2D::from_fn(n, n, |r, c| {
                if mask.get(r, c) {
                    0.0
                } else {
                    truth.get(r, c)
                }
            })?;
            Fixture {
                kind,
                image,
                mask,
                truth,
            }
        }
        FixtureKind::Stripes => {
            let period = stripe_period(n);
            let (s, c0) = STRIPE_ANGLE.sin_cos();
            let truth = Image2D::from_fn(n, n, |r, c| {
                let t = c as f64 * c0 + r as f64 * s;
                0.5 + 0.4 * (2.0 * PI * t / period).sin()
            })?;
            let mask = seeded_mask(n, n, opts.density, opts.seed)?;
            let image = Image2D::from_fn(n, n, |r, c| {
                if mask.get(r, c) {
                    0.0
                } else {
                    truth.get(r, c)
                }
            })?;
            Fixture {
                kind,
                image,
                mask,
                truth,
            }
        }
        FixtureKind::RampBump => {
            let s = n as f64;
            let centre = s / 2.0;
            let width = s / 6.0;
            let truth = Image2D::from_fn(n, n, |r, c| {
                let d2 = (r as f64 - centre).powi(2) + (c as f64 - centre).powi(2);
                0.2 + 0.5 * c as f64 / s + 0.1 * (-d2 / (2.0 * width * width)).exp()
            })?;
            Fixture {
                kind,
                image: truth.clone(),
                mask: Mask::empty(n, n),
                truth,
            }
        }
    };
    Ok(fixture)
}
