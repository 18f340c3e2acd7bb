//! Separable bicubic resampling (Keys kernel, a = -0.5) with replicate
//! borders. Plans precompute per-output source taps so the same operator
//! serves the image pipeline and the autodiff graph (whose backward pass
//! applies the transposed plan).

use crate::error::{Error, Result};
use crate::image::Image;

/// Keys cubic convolution kernel, a = -0.5.
pub fn cubic_weight(t: f64) -> f64 {
    let t = t.abs();
    const A: f64 = -0.5;
    if t < 1.0 {
        (A + 2.0) * t * t * t - (A + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        A * (t * t * t - 5.0 * t * t + 8.0 * t - 4.0)
    } else {
        0.0
    }
}

/// One resampling axis: for every output index, four (clamped source
/// index, weight) taps. `transposed` lists, per source index, the output
/// taps that read it.
#[derive(Debug, Clone)]
pub struct Plan1d {
    pub in_len: usize,
    pub out_len: usize,
    pub taps: Vec<[(usize, f64); 4]>,
    pub transposed: Vec<Vec<(usize, f64)>>,
}

impl Plan1d {
    pub fn new(in_len: usize, out_len: usize) -> Plan1d {
        assert!(in_len > 0 && out_len > 0);
        let scale = in_len as f64 / out_len as f64;
        let mut taps = Vec::with_capacity(out_len);
        let mut transposed = vec![Vec::new(); in_len];
        for o in 0..out_len {
            let src = (o as f64 + 0.5) * scale - 0.5;
            let base = src.floor() as isize;
            let mut tap = [(0usize, 0.0f64); 4];
            for (j, t) in tap.iter_mut().enumerate() {
                let idx = base - 1 + j as isize;
                let w = cubic_weight(src - idx as f64);
                let clamped = idx.clamp(0, in_len as isize - 1) as usize;
                *t = (clamped, w);
            }
            for &(idx, w) in &tap {
                if w != 0.0 {
                    transposed[idx].push((o, w));
                }
            }
            taps.push(tap);
        }
        Plan1d {
            in_len,
            out_len,
            taps,
            transposed,
        }
    }

    /// Resample a strided sequence: element i lives at `data[i * stride]`.
    #[inline]
    pub fn apply_strided(&self, input: &[f64], in_stride: usize, out: &mut [f64], out_stride: usize) {
        for (o, tap) in self.taps.iter().enumerate() {
            let mut acc = 0.0;
            for &(idx, w) in tap {
                acc += w * input[idx * in_stride];
            }
            out[o * out_stride] = acc;
        }
    }

    /// Transposed application (the adjoint), same strided layout.
    #[inline]
    pub fn apply_transposed_strided(
        &self,
        input: &[f64],
        in_stride: usize,
        out: &mut [f64],
        out_stride: usize,
    ) {
        for (i, outs) in self.transposed.iter().enumerate() {
            let mut acc = 0.0;
            for &(o, w) in outs {
                acc += w * input[o * in_stride];
            }
            out[i * out_stride] = acc;
        }
    }
}

/// Separable 2-D plan (rows then columns).
#[derive(Debug, Clone)]
pub struct Plan2d {
    pub rows: Plan1d,
    pub cols: Plan1d,
}

impl Plan2d {
    pub fn new(in_h: usize, in_w: usize, out_h: usize, out_w: usize) -> Plan2d {
        Plan2d {
            rows: Plan1d::new(in_h, out_h),
            cols: Plan1d::new(in_w, out_w),
        }
    }

    /// Resample one planar channel (`in_h * in_w` row-major values).
    pub fn apply_plane(&self, input: &[f64]) -> Vec<f64> {
        let (ih, iw) = (self.rows.in_len, self.cols.in_len);
        let (oh, ow) = (self.rows.out_len, self.cols.out_len);
        debug_assert_eq!(input.len(), ih * iw);
        let mut mid = vec![0.0; oh * iw];
        for x in 0..iw {
            self.rows.apply_strided(&input[x..], iw, &mut mid[x..], iw);
        }
        let mut out = vec![0.0; oh * ow];
        for y in 0..oh {
            self.cols
                .apply_strided(&mid[y * iw..(y + 1) * iw], 1, &mut out[y * ow..(y + 1) * ow], 1);
        }
        out
    }

    /// Adjoint of `apply_plane`: maps an `out_h * out_w` plane back to
    /// `in_h * in_w`.
    pub fn apply_plane_transposed(&self, grad: &[f64]) -> Vec<f64> {
        let (ih, iw) = (self.rows.in_len, self.cols.in_len);
        let (oh, ow) = (self.rows.out_len, self.cols.out_len);
        debug_assert_eq!(grad.len(), oh * ow);
        let mut mid = vec![0.0; oh * iw];
        for y in 0..oh {
            self.cols.apply_transposed_strided(
                &grad[y * ow..(y + 1) * ow],
                1,
                &mut mid[y * iw..(y + 1) * iw],
                1,
            );
        }
        let mut out = vec![0.0; ih * iw];
        for x in 0..iw {
            self.rows
                .apply_transposed_strided(&mid[x..], iw, &mut out[x..], iw);
        }
        out
    }
}

fn resize_image(img: &Image, out_h: usize, out_w: usize) -> Image {
    let plan = Plan2d::new(img.height(), img.width(), out_h, out_w);
    let c = img.channels();
    let mut out = Image::new(out_h, out_w, c);
    for ch in 0..c {
        let plane: Vec<f64> = (0..img.height() * img.width())
            .map(|i| img.data()[i * c + ch])
            .collect();
        let res = plan.apply_plane(&plane);
        for (i, v) in res.iter().enumerate() {
            out.data_mut()[i * c + ch] = *v;
        }
    }
    out
}

/// Bicubic 2x downsampling; dimensions must be even.
pub fn downsample2(img: &Image) -> Result<Image> {
    if img.height() % 2 != 0 || img.width() % 2 != 0 {
        return Err(Error::invalid(format!(
            "downsample2 needs even dims, got {}x{}",
            img.height(),
            img.width()
        )));
    }
    Ok(resize_image(img, img.height() / 2, img.width() / 2))
}

/// Bicubic 2x upsampling.
pub fn upsample2(img: &Image) -> Image {
    resize_image(img, img.height() * 2, img.width() * 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct (non-separated, per-pixel) evaluation of the same bicubic
    /// rule; keeps the fast path honest.
    fn resize_oracle(img: &Image, out_h: usize, out_w: usize) -> Image {
        let (ih, iw, c) = (img.height() as isize, img.width() as isize, img.channels());
        let sy = img.height() as f64 / out_h as f64;
        let sx = img.width() as f64 / out_w as f64;
        let mut out = Image::new(out_h, out_w, c);
        for oy in 0..out_h {
            for ox in 0..out_w {
                let fy = (oy as f64 + 0.5) * sy - 0.5;
                let fx = (ox as f64 + 0.5) * sx - 0.5;
                let by = fy.floor() as isize;
                let bx = fx.floor() as isize;
                for ch in 0..c {
                    let mut acc = 0.0;
                    for dy in -1..3isize {
                        for dx in -1..3isize {
                            let wy = cubic_weight(fy - (by + dy) as f64);
                            let wx = cubic_weight(fx - (bx + dx) as f64);
                            let yy = (by + dy).clamp(0, ih - 1) as usize;
                            let xx = (bx + dx).clamp(0, iw - 1) as usize;
                            acc += wy * wx * img.get(yy, xx, ch);
                        }
                    }
                    out.set(oy, ox, ch, acc);
                }
            }
        }
        out
    }

    #[test]
    fn constant_fixed_under_down_and_up() {
        let img = Image::constant(8, 8, 3, 0.7);
        let down = downsample2(&img).unwrap();
        assert!(down.data().iter().all(|v| (v - 0.7).abs() < 1e-12));
        let up = upsample2(&down);
        assert!(up.data().iter().all(|v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn downsample_halves_shape() {
        let img = Image::new(128, 64, 3);
        let down = downsample2(&img).unwrap();
        assert_eq!((down.height(), down.width()), (64, 32));
        assert!(downsample2(&Image::new(7, 8, 1)).is_err());
    }

    #[test]
    fn ramp_downsample_matches_analytic_subsampling() {
        // horizontal ramp v = x; interior outputs must reproduce the ramp
        let mut img = Image::new(16, 16, 1);
        for y in 0..16 {
            for x in 0..16 {
                img.set(y, x, 0, x as f64);
            }
        }
        let down = downsample2(&img).unwrap();
        for y in 0..8 {
            for x in 1..7 {
                let expect = 2.0 * x as f64 + 0.5;
                assert!(
                    (down.get(y, x, 0) - expect).abs() < 1e-6,
                    "at ({y},{x}): {} vs {expect}",
                    down.get(y, x, 0)
                );
            }
        }
    }

    #[test]
    fn separable_path_matches_direct_oracle() {
        let mut img = Image::new(10, 12, 3);
        let mut state = 1234567u64;
        for v in img.data_mut() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *v = (state >> 11) as f64 / (1u64 << 53) as f64;
        }
        for (oh, ow) in [(5, 6), (20, 24)] {
            let fast = resize_image(&img, oh, ow);
            let slow = resize_oracle(&img, oh, ow);
            let max = fast
                .data()
                .iter()
                .zip(slow.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(max < 1e-9, "max diff {max}");
        }
    }

    #[test]
    fn transposed_plan_is_adjoint() {
        // <A x, y> == <x, A^T y>
        let plan = Plan2d::new(6, 8, 3, 4);
        let x: Vec<f64> = (0..48).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..12).map(|i| (i as f64 * 0.71).cos()).collect();
        let ax = plan.apply_plane(&x);
        let aty = plan.apply_plane_transposed(&y);
        let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
