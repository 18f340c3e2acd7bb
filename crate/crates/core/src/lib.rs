//! Face deblurring toolkit: synthetic motion-blur degradation, a
//! coarse-deblur / parse / fine-deblur network cascade trained under
//! content, local structural, parsing, perceptual and adversarial
//! losses, and restoration-quality evaluation.
//!
//! Everything runs on the CPU in `f64`. The heavy inner loops (convolution,
//! blurring, per-sample metrics) are data-parallel via rayon when the
//! default `parallel` feature is enabled and fall back to sequential
//! execution without it. Both paths produce bit-identical results.

pub mod blur;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod image;
pub mod io;
pub mod losses;
pub mod networks;
pub mod nn;
pub mod resample;
pub mod training;

pub(crate) mod parallel;

pub use error::{Error, Result};
pub use image::Image;
