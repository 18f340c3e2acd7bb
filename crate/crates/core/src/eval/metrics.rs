//! PSNR and SSIM.
//!
//! PSNR is computed over all channels jointly; identical images report
//! the 99 dB cap. SSIM runs on Rec. 601 luma with the standard 11x11
//! Gaussian window (sigma 1.5), constants (0.01 L)^2 / (0.03 L)^2, valid
//! windows only.

use crate::error::{Error, Result};
use crate::image::Image;

pub const PSNR_CAP_DB: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::shape("psnr inputs differ in shape"));
    }
    if peak <= 0.0 {
        return Err(Error::invalid("psnr peak must be positive"));
    }
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as isize;
    let mut w: Vec<f64> = (-half..=half)
        .map(|i| (-(i * i) as f64 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Mean local SSIM; color images are converted to luma first.
/// Implemented with separable Gaussian filtering of the five moment maps.
pub fn ssim(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::shape("ssim inputs differ in shape"));
    }
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} images, got {h}x{w}"
        )));
    }
    let la = a.to_luma();
    let lb = b.to_luma();
    let win = gaussian_window();
    let c1 = (SSIM_K1 * peak).powi(2);
    let c2 = (SSIM_K2 * peak).powi(2);

    // separable weighted filtering, valid region only
    let filter = |img: &[f64], other: Option<&[f64]>| -> Vec<f64> {
        let src: Vec<f64> = match other {
            Some(o) => img.iter().zip(o).map(|(x, y)| x * y).collect(),
            None => img.to_vec(),
        };
        let wv = w - SSIM_WINDOW + 1;
        let mut horiz = vec![0.0; h * wv];
        for y in 0..h {
            for x in 0..wv {
                let mut acc = 0.0;
                for (k, wk) in win.iter().enumerate() {
                    acc += wk * src[y * w + x + k];
                }
                horiz[y * wv + x] = acc;
            }
        }
        let hv = h - SSIM_WINDOW + 1;
        let mut out = vec![0.0; hv * wv];
        for y in 0..hv {
            for x in 0..wv {
                let mut acc = 0.0;
                for (k, wk) in win.iter().enumerate() {
                    acc += wk * horiz[(y + k) * wv + x];
                }
                out[y * wv + x] = acc;
            }
        }
        out
    };

    let mu_a = filter(la.data(), None);
    let mu_b = filter(lb.data(), None);
    let m_aa = filter(la.data(), Some(la.data()));
    let m_bb = filter(lb.data(), Some(lb.data()));
    let m_ab = filter(la.data(), Some(lb.data()));

    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = m_aa[i] - ma * ma;
        let vb = m_bb[i] - mb * mb;
        let cov = m_ab[i] - ma * mb;
        let s = ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
            / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        total += s;
    }
    Ok(total / mu_a.len() as f64)
}

/// Independent direct (non-separated, per-window) SSIM used as the oracle
/// for the separable implementation.
pub fn ssim_reference(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::shape("ssim inputs differ in shape"));
    }
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid("image smaller than ssim window"));
    }
    let la = a.to_luma();
    let lb = b.to_luma();
    let win1d = gaussian_window();
    let mut win2d = vec![0.0; SSIM_WINDOW * SSIM_WINDOW];
    for i in 0..SSIM_WINDOW {
        for j in 0..SSIM_WINDOW {
            win2d[i * SSIM_WINDOW + j] = win1d[i] * win1d[j];
        }
    }
    let c1 = (SSIM_K1 * peak).powi(2);
    let c2 = (SSIM_K2 * peak).powi(2);
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=h - SSIM_WINDOW {
        for x0 in 0..=w - SSIM_WINDOW {
            let (mut ma, mut mb) = (0.0, 0.0);
            for i in 0..SSIM_WINDOW {
                for j in 0..SSIM_WINDOW {
                    let wk = win2d[i * SSIM_WINDOW + j];
                    ma += wk * la.get(y0 + i, x0 + j, 0);
                    mb += wk * lb.get(y0 + i, x0 + j, 0);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..SSIM_WINDOW {
                for j in 0..SSIM_WINDOW {
                    let wk = win2d[i * SSIM_WINDOW + j];
                    let da = la.get(y0 + i, x0 + j, 0) - ma;
                    let db = lb.get(y0 + i, x0 + j, 0) - mb;
                    va += wk * da * da;
                    vb += wk * db * db;
                    cov += wk * da * db;
                }
            }
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn pseudo_image(h: usize, w: usize, c: usize, seed: u64) -> Image {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut img = Image::new(h, w, c);
        for v in img.data_mut() {
            *v = rng.gen_range(0.0..1.0);
        }
        img
    }

    #[test]
    fn psnr_cap_symmetry_and_closed_form() {
        let a = pseudo_image(16, 16, 3, 1);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), PSNR_CAP_DB);
        // uniform error 16/255 at peak 1
        let mut b = Image::constant(16, 16, 3, 0.3);
        let mut a2 = Image::constant(16, 16, 3, 0.3);
        for v in b.data_mut() {
            *v += 16.0 / 255.0;
        }
        let expect = 10.0 * (1.0 / (16.0 / 255.0f64).powi(2)).log10();
        assert!((psnr(&a2, &b, 1.0).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 24.0486).abs() < 1e-3); // 20 log10(255/16)
        // symmetry
        let c = pseudo_image(16, 16, 3, 2);
        assert_eq!(psnr(&a, &c, 1.0).unwrap(), psnr(&c, &a, 1.0).unwrap());
        // shape check
        a2.data_mut()[0] = 0.0;
        assert!(psnr(&a, &Image::new(8, 8, 3), 1.0).is_err());
    }

    #[test]
    fn ssim_identity_and_disagreement() {
        let a = pseudo_image(24, 24, 3, 3);
        assert_eq!(ssim(&a, &a, 1.0).unwrap(), 1.0);
        let inv = Image::from_vec(24, 24, 3, a.data().iter().map(|v| 1.0 - v).collect()).unwrap();
        assert!(ssim(&a, &inv, 1.0).unwrap() < 1.0);
    }

    #[test]
    fn separable_matches_direct_reference() {
        for seed in 0..4u64 {
            let a = pseudo_image(32, 32, 3, 100 + seed);
            let mut b = a.clone();
            let mut rng = ChaCha20Rng::seed_from_u64(200 + seed);
            for v in b.data_mut() {
                *v = (*v + rng.gen_range(-0.1..0.1)).clamp(0.0, 1.0);
            }
            let fast = ssim(&a, &b, 1.0).unwrap();
            let slow = ssim_reference(&a, &b, 1.0).unwrap();
            assert!((fast - slow).abs() < 1e-4, "seed {seed}: {fast} vs {slow}");
        }
    }

    #[test]
    fn ssim_range_and_near_invariance_to_common_shift() {
        let mut a = pseudo_image(24, 24, 1, 7);
        for v in a.data_mut() {
            *v = 0.2 + 0.5 * *v;
        }
        let mut b = a.clone();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        for v in b.data_mut() {
            *v += rng.gen_range(-0.05..0.05);
        }
        let base = ssim(&a, &b, 1.0).unwrap();
        assert!((-1.0..=1.0).contains(&base));
        let shift = 0.02;
        let a2 = Image::from_vec(24, 24, 1, a.data().iter().map(|v| v + shift).collect()).unwrap();
        let b2 = Image::from_vec(24, 24, 1, b.data().iter().map(|v| v + shift).collect()).unwrap();
        let shifted = ssim(&a2, &b2, 1.0).unwrap();
        assert!(
            (base - shifted).abs() < 0.01,
            "ssim moved {base} -> {shifted} under a common shift"
        );
    }

    #[test]
    fn psnr_decreases_with_noise_level() {
        let sigmas = [0.01, 0.05, 0.1];
        let mut means = Vec::new();
        for &sigma in &sigmas {
            let mut sum = 0.0;
            for seed in 0..10u64 {
                let a = pseudo_image(24, 24, 3, 50 + seed);
                let mut rng = ChaCha20Rng::seed_from_u64(900 + seed);
                let b = Image::from_vec(
                    24,
                    24,
                    3,
                    a.data()
                        .iter()
                        .map(|v| {
                            let n: f64 = rng.gen_range(-1.0..1.0);
                            (v + sigma * n).clamp(0.0, 1.0)
                        })
                        .collect(),
                )
                .unwrap();
                sum += psnr(&a, &b, 1.0).unwrap();
            }
            means.push(sum / 10.0);
        }
        assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
    }
}
