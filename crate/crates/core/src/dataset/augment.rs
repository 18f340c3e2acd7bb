//! Geometric augmentation: one transform (scale, shift, rotation about
//! the image center) applied identically to the clear image, the blurred
//! image, and the label map. Images are sampled bilinearly, labels with
//! nearest neighbor; borders replicate, so shape and class alphabet are
//! preserved.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::manifest::Sample;
use crate::image::{Image, LabelMap};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AugmentConfig {
    pub scale_range: (f64, f64),
    /// Maximum shift along each axis, in pixels.
    pub max_shift: f64,
    pub max_rotation_deg: f64,
    pub rng_seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            scale_range: (0.9, 1.1),
            max_shift: 12.0,
            max_rotation_deg: 30.0,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeomTransform {
    pub scale: f64,
    pub shift: (f64, f64),
    pub rotation_deg: f64,
}

impl GeomTransform {
    pub const IDENTITY: GeomTransform = GeomTransform {
        scale: 1.0,
        shift: (0.0, 0.0),
        rotation_deg: 0.0,
    };

    pub fn sample(cfg: &AugmentConfig, rng: &mut impl Rng) -> GeomTransform {
        let (lo, hi) = cfg.scale_range;
        let scale = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        let shift = if cfg.max_shift > 0.0 {
            (
                rng.gen_range(-cfg.max_shift..=cfg.max_shift),
                rng.gen_range(-cfg.max_shift..=cfg.max_shift),
            )
        } else {
            (0.0, 0.0)
        };
        let rotation_deg = if cfg.max_rotation_deg > 0.0 {
            rng.gen_range(-cfg.max_rotation_deg..=cfg.max_rotation_deg)
        } else {
            0.0
        };
        GeomTransform {
            scale,
            shift,
            rotation_deg,
        }
    }

    /// Map an output pixel back to source coordinates (inverse warp).
    #[inline]
    fn source_of(&self, x: f64, y: f64, cx: f64, cy: f64) -> (f64, f64) {
        let theta = self.rotation_deg.to_radians();
        let (sin, cos) = theta.sin_cos();
        let dx = (x - cx - self.shift.0) / self.scale;
        let dy = (y - cy - self.shift.1) / self.scale;
        // rotate by -theta
        (cx + cos * dx + sin * dy, cy - sin * dx + cos * dy)
    }
}

fn warp_image(img: &Image, t: &GeomTransform) -> Image {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let mut out = Image::new(h, w, c);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = t.source_of(x as f64, y as f64, cx, cy);
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            let clamp_x = |v: isize| v.clamp(0, w as isize - 1) as usize;
            let clamp_y = |v: isize| v.clamp(0, h as isize - 1) as usize;
            let (x0i, y0i) = (x0 as isize, y0 as isize);
            for ch in 0..c {
                let v00 = img.get(clamp_y(y0i), clamp_x(x0i), ch);
                let v01 = img.get(clamp_y(y0i), clamp_x(x0i + 1), ch);
                let v10 = img.get(clamp_y(y0i + 1), clamp_x(x0i), ch);
                let v11 = img.get(clamp_y(y0i + 1), clamp_x(x0i + 1), ch);
                let v = v00 * (1.0 - fx) * (1.0 - fy)
                    + v01 * fx * (1.0 - fy)
                    + v10 * (1.0 - fx) * fy
                    + v11 * fx * fy;
                out.set(y, x, ch, v);
            }
        }
    }
    out
}

fn warp_labels(labels: &LabelMap, t: &GeomTransform) -> LabelMap {
    let (h, w) = (labels.height, labels.width);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let mut out = LabelMap::new(h, w);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = t.source_of(x as f64, y as f64, cx, cy);
            let xi = (sx.round() as isize).clamp(0, w as isize - 1) as usize;
            let yi = (sy.round() as isize).clamp(0, h as isize - 1) as usize;
            out.set(y, x, labels.get(yi, xi));
        }
    }
    out
}

/// Apply one explicit transform to all three sample rasters.
pub fn apply_geometric(sample: &Sample, t: &GeomTransform) -> Sample {
    Sample {
        clear: warp_image(&sample.clear, t),
        blurred: warp_image(&sample.blurred, t),
        labels: warp_labels(&sample.labels, t),
        kernel_id: sample.kernel_id.clone(),
        source_id: sample.source_id.clone(),
    }
}

/// Sample a random transform from the config and apply it.
pub fn augment(sample: &Sample, cfg: &AugmentConfig) -> Sample {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.rng_seed);
    let t = GeomTransform::sample(cfg, &mut rng);
    apply_geometric(sample, &t)
}
