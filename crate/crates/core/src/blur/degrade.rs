//! Degradation: convolve with a blur kernel, add Gaussian noise, clip.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::blur::kernel::BlurKernel;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::parallel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    Replicate,
    Reflect,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DegradationConfig {
    pub noise_sigma: f64,
    pub boundary_mode: BoundaryMode,
    pub rng_seed: u64,
}

impl Default for DegradationConfig {
    fn default() -> Self {
        // noise sigma on the [0, 1] intensity scale
        DegradationConfig {
            noise_sigma: 0.01,
            boundary_mode: BoundaryMode::Replicate,
            rng_seed: 0,
        }
    }
}

impl DegradationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return Err(Error::invalid(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }

    pub fn with_seed(&self, rng_seed: u64) -> DegradationConfig {
        DegradationConfig { rng_seed, ..*self }
    }
}

#[inline]
fn border(i: isize, len: usize, mode: BoundaryMode) -> usize {
    let n = len as isize;
    match mode {
        BoundaryMode::Replicate => i.clamp(0, n - 1) as usize,
        BoundaryMode::Reflect => {
            // mirror about the edge pixels (period 2(n-1))
            let mut j = i;
            let period = 2 * (n - 1).max(1);
            j = j.rem_euclid(period);
            if j >= n {
                j = period - j;
            }
            j as usize
        }
    }
}

/// 2-D convolution of every channel with the kernel (equivalently,
/// correlation with the flipped kernel), with the given border handling.
/// Pure and linear in the image; no noise, no clipping.
pub fn convolve2d(img: &Image, kernel: &BlurKernel, mode: BoundaryMode) -> Result<Image> {
    convolve2d_mode(img, kernel, mode, cfg!(feature = "parallel"))
}

#[doc(hidden)]
pub fn convolve2d_mode(
    img: &Image,
    kernel: &BlurKernel,
    mode: BoundaryMode,
    par: bool,
) -> Result<Image> {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    if c != 1 && c != 3 {
        return Err(Error::invalid(format!("expected 1 or 3 channels, got {c}")));
    }
    let s = kernel.size();
    if s > h || s > w {
        return Err(Error::KernelTooLarge {
            kernel: s,
            height: h,
            width: w,
        });
    }
    let half = (s / 2) as isize;
    let taps = kernel.taps();
    let src = img.data();
    let mut out = Image::new(h, w, c);
    parallel::fill_chunks_mode(
        out.data_mut(),
        w * c,
        |y, row| {
            for x in 0..w {
                for ch in 0..c {
                    let mut acc = 0.0;
                    for u in 0..s {
                        let sy = border(y as isize - (u as isize - half), h, mode);
                        for v in 0..s {
                            let sx = border(x as isize - (v as isize - half), w, mode);
                            acc += taps[u * s + v] * src[(sy * w + sx) * c + ch];
                        }
                    }
                    row[x * c + ch] = acc;
                }
            }
        },
        par,
    );
    Ok(out)
}

/// Full degradation: blur, then Gaussian noise from `cfg.rng_seed`, then
/// clip to [0, 1].
pub fn apply_blur(img: &Image, kernel: &BlurKernel, cfg: &DegradationConfig) -> Result<Image> {
    cfg.validate()?;
    let mut out = convolve2d(img, kernel, cfg.boundary_mode)?;
    if cfg.noise_sigma > 0.0 {
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.rng_seed);
        let normal = Normal::new(0.0, cfg.noise_sigma).expect("valid sigma");
        for v in out.data_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    out.clamp01();
    Ok(out)
}
