//! Wavelet-domain face morphing with adversarial smoothing perturbation.
//!
//! The pipeline has three stages:
//!
//! 1. **Morph generation** ([`morph`]): two landmark-annotated face images
//!    are warped onto their averaged landmarks, decomposed into 64 uniform
//!    wavelet-packet sub-bands, fused (baseband averaged, detail bands
//!    magnitude-maxed) and reconstructed. The convex hull of the common
//!    landmarks is spliced back onto each subject's frame.
//! 2. **Adversarial perturbation** ([`perturb`]): a basic-iterative-method
//!    attack drives a differentiable morph detector ([`detector`]) towards
//!    the bona-fide class under an L-infinity pixel budget, with a total
//!    variation term keeping the perturbation smooth.
//! 3. **Evaluation** ([`metrics`]): SSIM scalar/map, normalized difference
//!    maps, embedding distances and ROC/AUC over detector scores.
//!
//! Conventions used throughout the crate:
//!
//! * Pixels are `f64` in `[0, 255]`; quantization to 8 bits happens only
//!   when a PNG is written.
//! * Raster buffers are row-major, top-to-bottom, channel-interleaved;
//!   see [`image::Image`].
//! * Coordinates are `(x, y)` with the origin at the top-left corner,
//!   x growing rightward and y growing downward.

pub mod cli;
pub mod detector;
pub mod error;
pub mod geometry;
pub mod image;
pub mod metrics;
pub mod morph;
pub mod perturb;
pub mod wavelet;

pub use error::{Error, Result};
