//! Procedural face images with exact label maps. Purely synthetic
//! geometry (ellipses and bands) — enough structure for the tiny-profile
//! pipeline, CI runs and demos without any external dataset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::image::{Image, LabelMap};

// class ids of the default schema
const BG: u8 = 0;
const SKIN: u8 = 1;
const L_BROW: u8 = 2;
const R_BROW: u8 = 3;
const L_EYE: u8 = 4;
const R_EYE: u8 = 5;
const NOSE: u8 = 6;
const U_LIP: u8 = 7;
const TEETH: u8 = 8;
const LO_LIP: u8 = 9;
const HAIR: u8 = 10;

/// Deterministic face + label map; every one of the eight structural
/// components is present (at least one pixel) for any size >= 24.
pub fn synth_face(size: usize, seed: u64) -> (Image, LabelMap) {
    assert!(size >= 24, "synthetic faces need size >= 24");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let s = size as f64;

    let skin = [
        rng.gen_range(0.65..0.9),
        rng.gen_range(0.5..0.72),
        rng.gen_range(0.4..0.6),
    ];
    let hair = [
        rng.gen_range(0.05..0.45),
        rng.gen_range(0.05..0.35),
        rng.gen_range(0.02..0.25),
    ];
    let bg = [
        rng.gen_range(0.1..0.95),
        rng.gen_range(0.1..0.95),
        rng.gen_range(0.1..0.95),
    ];
    let eye = [0.08, 0.08, rng.gen_range(0.1..0.45)];
    let brow = [hair[0] * 0.8, hair[1] * 0.8, hair[2] * 0.8];
    let nose = [skin[0] * 0.85, skin[1] * 0.8, skin[2] * 0.8];
    let lip = [rng.gen_range(0.55..0.85), 0.2, 0.25];
    let teeth = [0.95, 0.93, 0.88];

    let cx = s * rng.gen_range(0.47..0.53);
    let cy = s * rng.gen_range(0.5..0.56);
    let face_rx = s * rng.gen_range(0.28..0.34);
    let face_ry = s * rng.gen_range(0.34..0.4);
    let eye_dx = face_rx * 0.45;
    let eye_y = cy - face_ry * 0.22;
    let eye_r = (s * 0.035).max(0.8);
    let brow_y = eye_y - face_ry * 0.18;
    let mouth_y = cy + face_ry * 0.45;
    let lip_h = (s * 0.022).max(0.6);
    let mouth_rx = face_rx * 0.5;
    let nose_h = face_ry * 0.28;
    let nose_w = (s * 0.03).max(0.7);

    let shade_px = rng.gen_range(0.5..2.0);
    let shade_py = rng.gen_range(0.5..2.0);

    let mut img = Image::new(size, size, 3);
    let mut labels = LabelMap::new(size, size);
    for y in 0..size {
        for x in 0..size {
            let (xf, yf) = (x as f64, y as f64);
            let in_ellipse = |ex: f64, ey: f64, rx: f64, ry: f64| {
                ((xf - ex) / rx).powi(2) + ((yf - ey) / ry).powi(2) <= 1.0
            };
            let mut class = BG;
            let mut color = bg;
            // hair: larger ellipse behind the upper face
            if in_ellipse(cx, cy - face_ry * 0.25, face_rx * 1.25, face_ry * 1.05) {
                class = HAIR;
                color = hair;
            }
            if in_ellipse(cx, cy, face_rx, face_ry) {
                class = SKIN;
                color = skin;
            }
            // brows
            if (yf - brow_y).abs() <= lip_h && (xf - (cx - eye_dx)).abs() <= eye_r * 1.6 {
                class = L_BROW;
                color = brow;
            }
            if (yf - brow_y).abs() <= lip_h && (xf - (cx + eye_dx)).abs() <= eye_r * 1.6 {
                class = R_BROW;
                color = brow;
            }
            // eyes
            if in_ellipse(cx - eye_dx, eye_y, eye_r, eye_r * 0.8) {
                class = L_EYE;
                color = eye;
            }
            if in_ellipse(cx + eye_dx, eye_y, eye_r, eye_r * 0.8) {
                class = R_EYE;
                color = eye;
            }
            // nose
            if (xf - cx).abs() <= nose_w && yf >= cy - nose_h * 0.2 && yf <= cy + nose_h {
                class = NOSE;
                color = nose;
            }
            // mouth: upper lip / teeth / lower lip, each `band` rows tall
            let band = (lip_h.ceil() as isize).max(1);
            let teeth_row = mouth_y.round() as isize;
            let yi = y as isize;
            if (xf - cx).abs() <= mouth_rx {
                if yi >= teeth_row - band && yi < teeth_row {
                    class = U_LIP;
                    color = lip;
                } else if yi >= teeth_row && yi < teeth_row + band {
                    class = TEETH;
                    color = teeth;
                } else if yi >= teeth_row + band && yi < teeth_row + 2 * band {
                    class = LO_LIP;
                    color = lip;
                }
            }
            // low-frequency shading + tiny deterministic grain
            let shade = 0.08
                * ((xf / s * std::f64::consts::TAU * shade_px).sin()
                    + (yf / s * std::f64::consts::TAU * shade_py).cos());
            let grain =
                0.015 * ((((x * 31 + y * 17) ^ seed as usize) % 97) as f64 / 96.0 - 0.5);
            labels.set(y, x, class);
            for c in 0..3 {
                img.set(y, x, c, (color[c] + shade + grain).clamp(0.0, 1.0));
            }
        }
    }
    (img, labels)
}
