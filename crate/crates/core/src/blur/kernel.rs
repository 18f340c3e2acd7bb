//! Rasterizing trajectories into normalized point-spread functions, and
//! the on-disk kernel archive (one directory per size, npy array + JSON
//! sidecar per kernel).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blur::trajectory::Trajectory;
use crate::error::{Error, Result};
use crate::io::npy;
use crate::parallel;

pub const DEFAULT_KERNEL_SIZES: [usize; 8] = [13, 15, 17, 19, 21, 23, 25, 27];

/// Sampling density along trajectory segments (sub-pixel step).
const SUBSTEP: f64 = 0.1;

/// Normalized non-negative S×S blur operator.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurKernel {
    size: usize,
    taps: Vec<f64>,
}

impl BlurKernel {
    pub fn from_taps(size: usize, taps: Vec<f64>) -> Result<BlurKernel> {
        if size % 2 == 0 || size < 3 {
            return Err(Error::invalid(format!("kernel size must be odd >= 3, got {size}")));
        }
        if taps.len() != size * size {
            return Err(Error::shape(format!(
                "kernel needs {} taps, got {}",
                size * size,
                taps.len()
            )));
        }
        if taps.iter().any(|t| *t < 0.0 || !t.is_finite()) {
            return Err(Error::invalid("kernel taps must be finite and non-negative"));
        }
        let sum: f64 = taps.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("kernel taps must sum to 1, got {sum}")));
        }
        Ok(BlurKernel { size, taps })
    }

    /// All mass at the central tap.
    pub fn delta(size: usize) -> Result<BlurKernel> {
        if size % 2 == 0 || size < 3 {
            return Err(Error::invalid(format!("kernel size must be odd >= 3, got {size}")));
        }
        let mut taps = vec![0.0; size * size];
        let c = size / 2;
        taps[c * size + c] = 1.0;
        Ok(BlurKernel { size, taps })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.taps[row * self.size + col]
    }
}

/// Rasterize a trajectory into an S×S kernel: the path is centered on its
/// centroid, scaled down only if it would leave the grid, and deposited
/// as bilinear footprints sampled every `SUBSTEP` pixels along segments
/// (equal exposure time per segment).
pub fn rasterize_kernel(traj: &Trajectory, size: usize) -> Result<BlurKernel> {
    if size % 2 == 0 || size < 3 {
        return Err(Error::invalid(format!("kernel size must be odd >= 3, got {size}")));
    }
    let center = (size - 1) as f64 / 2.0;
    let (cx, cy) = traj.centroid();
    let limit = center - 0.51;
    let extent = traj
        .points()
        .iter()
        .map(|(x, y)| (x - cx).abs().max((y - cy).abs()))
        .fold(0.0f64, f64::max);
    let scale = if extent > limit && limit > 0.0 {
        limit / extent
    } else {
        1.0
    };

    let mapped: Vec<(f64, f64)> = traj
        .points()
        .iter()
        .map(|(x, y)| (center + scale * (x - cx), center + scale * (y - cy)))
        .collect();

    let mut taps = vec![0.0; size * size];
    let segments = mapped.len() - 1;
    for seg in mapped.windows(2) {
        let (ax, ay) = seg[0];
        let (bx, by) = seg[1];
        let len = (bx - ax).hypot(by - ay);
        let substeps = ((len / SUBSTEP).ceil() as usize).max(1);
        let w = 1.0 / (segments as f64 * substeps as f64);
        for t in 0..substeps {
            let f = (t as f64 + 0.5) / substeps as f64;
            let px = ax + f * (bx - ax);
            let py = ay + f * (by - ay);
            deposit_bilinear(&mut taps, size, px, py, w);
        }
    }

    let sum: f64 = taps.iter().sum();
    debug_assert!(sum > 0.0);
    for t in &mut taps {
        *t /= sum;
    }
    BlurKernel::from_taps(size, taps)
}

fn deposit_bilinear(taps: &mut [f64], size: usize, x: f64, y: f64, w: f64) {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (xi, yi) = (x0 as isize, y0 as isize);
    let mut put = |col: isize, row: isize, v: f64| {
        if v > 0.0 && col >= 0 && row >= 0 && (col as usize) < size && (row as usize) < size {
            taps[row as usize * size + col as usize] += v;
        }
    };
    put(xi, yi, w * (1.0 - fx) * (1.0 - fy));
    put(xi + 1, yi, w * fx * (1.0 - fy));
    put(xi, yi + 1, w * (1.0 - fx) * fy);
    put(xi + 1, yi + 1, w * fx * fy);
}

/// JSON sidecar stored next to each kernel array.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct KernelMeta {
    pub size: usize,
    pub seed: u64,
    pub anxiety: f64,
    pub length: usize,
}

/// `{dir}/size_{S}/{id}.npy` plus `{id}.json`. The id doubles as the
/// manifest kernel id.
pub fn kernel_id(size: usize, seed: u64) -> String {
    format!("k{size:02}_{seed:08}")
}

pub fn save_kernel(dir: &Path, kernel: &BlurKernel, meta: &KernelMeta) -> Result<PathBuf> {
    let sub = dir.join(format!("size_{:02}", kernel.size()));
    fs::create_dir_all(&sub)?;
    let id = kernel_id(meta.size, meta.seed);
    let npy_path = sub.join(format!("{id}.npy"));
    npy::write_2d(&npy_path, kernel.size(), kernel.size(), kernel.taps())?;
    let json_path = sub.join(format!("{id}.json"));
    fs::write(&json_path, serde_json::to_vec_pretty(meta)?)?;
    Ok(npy_path)
}

pub fn load_kernel(npy_path: &Path) -> Result<(BlurKernel, KernelMeta)> {
    let (rows, cols, taps) = npy::read_2d(npy_path)?;
    if rows != cols {
        return Err(Error::shape(format!("kernel file is {rows}x{cols}, expected square")));
    }
    let kernel = BlurKernel::from_taps(rows, taps)?;
    let json_path = npy_path.with_extension("json");
    let meta: KernelMeta = serde_json::from_slice(&fs::read(&json_path)?)?;
    Ok((kernel, meta))
}

/// Load every kernel below `dir`, sorted by id for determinism.
pub fn load_archive(dir: &Path) -> Result<Vec<(String, BlurKernel, KernelMeta)>> {
    let mut out = Vec::new();
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    for sub in subdirs {
        let mut files: Vec<PathBuf> = fs::read_dir(&sub)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "npy"))
            .collect();
        files.sort();
        for f in files {
            let (kernel, meta) = load_kernel(&f)?;
            let id = f
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::invalid("bad kernel filename"))?
                .to_string();
            out.push((id, kernel, meta));
        }
    }
    Ok(out)
}

/// Generate `per_size` kernels for every requested size. Seeds are
/// `base_seed`, `base_seed + 1`, ... per kernel, so workers are
/// independent and the batch is reproducible.
pub fn generate_batch(
    sizes: &[usize],
    per_size: usize,
    base_seed: u64,
    length: usize,
    anxiety: f64,
) -> Result<Vec<(BlurKernel, KernelMeta)>> {
    generate_batch_mode(
        sizes,
        per_size,
        base_seed,
        length,
        anxiety,
        cfg!(feature = "parallel"),
    )
}

#[doc(hidden)]
pub fn generate_batch_mode(
    sizes: &[usize],
    per_size: usize,
    base_seed: u64,
    length: usize,
    anxiety: f64,
    par: bool,
) -> Result<Vec<(BlurKernel, KernelMeta)>> {
    for &s in sizes {
        if s % 2 == 0 || s < 3 {
            return Err(Error::invalid(format!("kernel size must be odd >= 3, got {s}")));
        }
    }
    let jobs: Vec<(usize, u64)> = sizes
        .iter()
        .enumerate()
        .flat_map(|(i, &s)| {
            (0..per_size).map(move |j| (s, base_seed + (i * per_size + j) as u64))
        })
        .collect();
    let results = parallel::map_indexed_mode(
        jobs.len(),
        |i| {
            let (size, seed) = jobs[i];
            let traj = generate_trajectory_for(size, length, anxiety, seed)?;
            let kernel = rasterize_kernel(&traj, size)?;
            Ok((
                kernel,
                KernelMeta {
                    size,
                    seed,
                    anxiety,
                    length,
                },
            ))
        },
        par,
    );
    results.into_iter().collect()
}

fn generate_trajectory_for(
    _size: usize,
    length: usize,
    anxiety: f64,
    seed: u64,
) -> Result<Trajectory> {
    crate::blur::trajectory::generate_trajectory(length, anxiety, seed)
}
