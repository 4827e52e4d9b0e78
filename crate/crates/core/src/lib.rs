//! Sub-Riemannian diffusion on orientation stacks for image inpainting and enhancement.
//!
//! Images are lifted to functions of `(x, y, theta)`, diffused with hypoelliptic
//! operators built from the left-invariant fields of the rototranslation group,
//! and projected back.

pub mod ahe;
pub mod app;
pub mod config;
pub mod diffusion;
pub mod error;
pub mod filters;
pub mod fixtures;
pub mod grid;
pub mod io;
pub mod lift;
pub mod metrics;

pub use error::{Error, Result};
pub use grid::{Boundary, GridSpec, Image2D, Mask, OrientationStack};
