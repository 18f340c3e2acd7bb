//! Camera-shake paths as inertial random walks: constant initial velocity,
//! Gaussian velocity perturbations scaled by an `anxiety` parameter, and
//! occasional impulsive direction changes. `anxiety = 0` degenerates to a
//! straight line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Ordered sub-pixel 2-D positions of one camera path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    points: Vec<(f64, f64)>,
}

impl Trajectory {
    pub fn from_points(points: Vec<(f64, f64)>) -> Result<Trajectory> {
        if points.len() < 2 {
            return Err(Error::invalid("trajectory needs at least 2 points"));
        }
        if points
            .iter()
            .any(|(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(Error::invalid("trajectory contains non-finite points"));
        }
        Ok(Trajectory { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: length >= 2
    }

    pub fn centroid(&self) -> (f64, f64) {
        let n = self.points.len() as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(ax, ay), (x, y)| (ax + x, ay + y));
        (sx / n, sy / n)
    }
}

const BASE_SPEED: f64 = 0.5;
const PERTURB_STD: f64 = 0.25;
const IMPULSE_PROB: f64 = 0.06;

/// Generate a shake path with `length` samples. Deterministic for a fixed
/// seed; `anxiety` in [0, 1] controls curvature (0 = straight line).
pub fn generate_trajectory(length: usize, anxiety: f64, seed: u64) -> Result<Trajectory> {
    if length < 2 {
        return Err(Error::invalid(format!(
            "trajectory length must be >= 2, got {length}"
        )));
    }
    if !(0.0..=1.0).contains(&anxiety) {
        return Err(Error::invalid(format!(
            "anxiety must be in [0, 1], got {anxiety}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut vx = BASE_SPEED * angle.cos();
    let mut vy = BASE_SPEED * angle.sin();
    let mut points = Vec::with_capacity(length);
    let (mut x, mut y) = (0.0, 0.0);
    points.push((x, y));
    for _ in 1..length {
        if anxiety > 0.0 {
            if rng.gen_range(0.0..1.0) < IMPULSE_PROB * anxiety {
                let speed = (vx * vx + vy * vy).sqrt();
                let new_angle = rng.gen_range(0.0..std::f64::consts::TAU);
                vx = speed * new_angle.cos();
                vy = speed * new_angle.sin();
            }
            let nx: f64 = StandardNormal.sample(&mut rng);
            let ny: f64 = StandardNormal.sample(&mut rng);
            vx += anxiety * PERTURB_STD * nx;
            vy += anxiety * PERTURB_STD * ny;
        }
        x += vx;
        y += vy;
        points.push((x, y));
    }
    Trajectory::from_points(points)
}
