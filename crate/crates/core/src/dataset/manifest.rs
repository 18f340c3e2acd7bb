//! Sample manifests: deterministic (clear image × kernel) pairings with
//! per-sample degradation seeds, stored as JSON lines.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blur::{apply_blur, kernel::load_archive, BlurKernel, DegradationConfig};
use crate::error::{Error, Result};
use crate::image::{Image, LabelMap};
use crate::parallel;

/// One loaded training/evaluation sample.
#[derive(Debug, Clone)]
pub struct Sample {
    pub clear: Image,
    pub blurred: Image,
    pub labels: LabelMap,
    pub kernel_id: String,
    pub source_id: String,
}

impl Sample {
    pub fn validate(&self) -> Result<()> {
        if !self.clear.same_shape(&self.blurred) {
            return Err(Error::shape(format!(
                "sample {}: clear and blurred shapes differ",
                self.source_id
            )));
        }
        if self.labels.height != self.clear.height() || self.labels.width != self.clear.width() {
            return Err(Error::shape(format!(
                "sample {}: label map {}x{} vs image {}x{}",
                self.source_id,
                self.labels.height,
                self.labels.width,
                self.clear.height(),
                self.clear.width()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestEntry {
    pub source_id: String,
    pub kernel_id: String,
    pub kernel_size: usize,
    pub clear: PathBuf,
    pub labels: PathBuf,
    pub kernel: PathBuf,
    /// Empty until `materialize_blurred` writes the degraded PNG.
    pub blurred: PathBuf,
    pub noise_sigma: f64,
    pub rng_seed: u64,
    /// Label provenance (e.g. "ground_truth", "pseudo", "synthetic").
    pub label_source: String,
    pub split: Split,
}

/// splitmix64 of (base, index); gives workers independent streams.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Pair every clear image in `clear_dir` with every kernel in
/// `kernel_dir`. Each image must have a same-stem label PNG of matching
/// spatial size in `label_dir`. Ordering (sorted names × sorted kernel
/// ids) and per-entry seeds are deterministic.
pub fn build_manifest(
    clear_dir: &Path,
    label_dir: &Path,
    kernel_dir: &Path,
    cfg: &DegradationConfig,
    label_source: &str,
    split: Split,
) -> Result<Vec<ManifestEntry>> {
    cfg.validate()?;
    let mut images: Vec<PathBuf> = fs::read_dir(clear_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .collect();
    images.sort();
    if images.is_empty() {
        return Err(Error::invalid(format!(
            "no .png images in {}",
            clear_dir.display()
        )));
    }
    let kernels = load_archive(kernel_dir)?;
    if kernels.is_empty() {
        return Err(Error::invalid(format!(
            "no kernels in {}",
            kernel_dir.display()
        )));
    }

    let mut entries = Vec::with_capacity(images.len() * kernels.len());
    for img_path in &images {
        let stem = img_path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::invalid("bad image filename"))?;
        let label_path = label_dir.join(format!("{stem}.png"));
        if !label_path.exists() {
            return Err(Error::MissingLabel {
                image: img_path.clone(),
                expected: label_path,
            });
        }
        let img = Image::load_png(img_path)?;
        let labels = LabelMap::load_png(&label_path)?;
        if labels.height != img.height() || labels.width != img.width() {
            return Err(Error::shape(format!(
                "{}: label map {}x{} vs image {}x{}",
                img_path.display(),
                labels.height,
                labels.width,
                img.height(),
                img.width()
            )));
        }
        for (kid, kernel, _meta) in &kernels {
            let index = entries.len() as u64;
            entries.push(ManifestEntry {
                source_id: stem.to_string(),
                kernel_id: kid.clone(),
                kernel_size: kernel.size(),
                clear: img_path.clone(),
                labels: label_path.clone(),
                kernel: kernel_dir
                    .join(format!("size_{:02}", kernel.size()))
                    .join(format!("{kid}.npy")),
                blurred: PathBuf::new(),
                noise_sigma: cfg.noise_sigma,
                rng_seed: derive_seed(cfg.rng_seed, index),
                label_source: label_source.to_string(),
                split,
            });
        }
    }
    Ok(entries)
}

/// Error if any kernel id appears in both manifests.
pub fn verify_disjoint_kernels(train: &[ManifestEntry], test: &[ManifestEntry]) -> Result<()> {
    let train_ids: BTreeSet<&str> = train.iter().map(|e| e.kernel_id.as_str()).collect();
    let test_ids: BTreeSet<&str> = test.iter().map(|e| e.kernel_id.as_str()).collect();
    let overlap: Vec<&str> = train_ids.intersection(&test_ids).copied().collect();
    if !overlap.is_empty() {
        return Err(Error::KernelOverlap(overlap.join(", ")));
    }
    Ok(())
}

/// Degrade every entry's clear image with its kernel and per-entry seed
/// and write the blurred PNGs under `out_dir/blurred/`. Returns entries
/// with `blurred` paths filled in.
pub fn materialize_blurred(
    entries: &[ManifestEntry],
    out_dir: &Path,
) -> Result<Vec<ManifestEntry>> {
    let blur_dir = out_dir.join("blurred");
    fs::create_dir_all(&blur_dir)?;
    let results: Vec<Result<ManifestEntry>> = parallel::map_indexed(entries.len(), |i| {
        let mut entry = entries[i].clone();
        let clear = Image::load_png(&entry.clear)?;
        let (rows, cols, taps) = crate::io::npy::read_2d(&entry.kernel)?;
        if rows != cols {
            return Err(Error::shape("kernel file not square"));
        }
        let kernel = BlurKernel::from_taps(rows, taps)?;
        let cfg = DegradationConfig {
            noise_sigma: entry.noise_sigma,
            boundary_mode: crate::blur::BoundaryMode::Replicate,
            rng_seed: entry.rng_seed,
        };
        let blurred = apply_blur(&clear, &kernel, &cfg)?;
        let name = format!("{}__{}.png", entry.source_id, entry.kernel_id);
        let path = blur_dir.join(name);
        blurred.save_png(&path)?;
        entry.blurred = path;
        Ok(entry)
    });
    results.into_iter().collect()
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for e in entries {
        serde_json::to_writer(&mut f, e)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    }
}

fn normalize(p: &Path) -> PathBuf {
    use std::path::Component;
    let abs = if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir().unwrap_or_default().join(p)
    };
    let mut out = PathBuf::new();
    for c in abs.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                out.pop();
            }
            other => out.push(other),
        }
    }
    out
}

/// Express `path` relative to `base` (both normalized against the current
/// directory), stepping up with `..` where needed.
pub fn relative_to(base: &Path, path: &Path) -> PathBuf {
    let base = normalize(base);
    let path = normalize(path);
    let base_parts: Vec<_> = base.components().collect();
    let path_parts: Vec<_> = path.components().collect();
    let common = base_parts
        .iter()
        .zip(&path_parts)
        .take_while(|(a, b)| a == b)
        .count();
    let mut out = PathBuf::new();
    for _ in common..base_parts.len() {
        out.push("..");
    }
    for part in &path_parts[common..] {
        out.push(part);
    }
    out
}

/// Rewrite every path of every entry relative to `base` (the directory
/// the manifest file will live in), so the manifest is usable from any
/// working directory.
pub fn relativize_entries(entries: &mut [ManifestEntry], base: &Path) {
    for e in entries {
        e.clear = relative_to(base, &e.clear);
        e.labels = relative_to(base, &e.labels);
        e.kernel = relative_to(base, &e.kernel);
        if !e.blurred.as_os_str().is_empty() {
            e.blurred = relative_to(base, &e.blurred);
        }
    }
}

/// Load the three rasters an entry points at. `base` resolves relative
/// paths (usually the manifest's directory).
pub fn load_sample(entry: &ManifestEntry, base: Option<&Path>) -> Result<Sample> {
    let clear = Image::load_png(resolve(base, &entry.clear))?;
    let labels = LabelMap::load_png(resolve(base, &entry.labels))?;
    if entry.blurred.as_os_str().is_empty() {
        return Err(Error::invalid(format!(
            "entry {}/{} has no blurred image; run materialization first",
            entry.source_id, entry.kernel_id
        )));
    }
    let blurred = Image::load_png(resolve(base, &entry.blurred))?;
    let sample = Sample {
        clear,
        blurred,
        labels,
        kernel_id: entry.kernel_id.clone(),
        source_id: entry.source_id.clone(),
    };
    sample.validate()?;
    Ok(sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blur::kernel::{generate_batch, save_kernel};
    use crate::dataset::synthetic::synth_face;

    fn setup(dir: &Path, n_images: usize, sizes: &[usize], per_size: usize) -> (PathBuf, PathBuf, PathBuf) {
        let clear = dir.join("clear");
        let labels = dir.join("labels");
        let kernels = dir.join("kernels");
        fs::create_dir_all(&clear).unwrap();
        fs::create_dir_all(&labels).unwrap();
        fs::create_dir_all(&kernels).unwrap();
        for i in 0..n_images {
            let (img, lab) = synth_face(32, i as u64);
            img.save_png(clear.join(format!("face_{i:03}.png"))).unwrap();
            lab.save_png(labels.join(format!("face_{i:03}.png"))).unwrap();
        }
        for (k, m) in generate_batch(sizes, per_size, 11, 48, 0.5).unwrap() {
            save_kernel(&kernels, &k, &m).unwrap();
        }
        (clear, labels, kernels)
    }

    #[test]
    fn cartesian_product_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let (clear, labels, kernels) = setup(dir.path(), 2, &[13], 3);
        let cfg = DegradationConfig::default();
        let m1 = build_manifest(&clear, &labels, &kernels, &cfg, "synthetic", Split::Train).unwrap();
        assert_eq!(m1.len(), 6);
        let m2 = build_manifest(&clear, &labels, &kernels, &cfg, "synthetic", Split::Train).unwrap();
        let p1 = dir.path().join("m1.jsonl");
        let p2 = dir.path().join("m2.jsonl");
        write_manifest(&p1, &m1).unwrap();
        write_manifest(&p2, &m2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
        let back = read_manifest(&p1).unwrap();
        assert_eq!(back, m1);
    }

    #[test]
    fn missing_label_names_the_image() {
        let dir = tempfile::tempdir().unwrap();
        let (clear, labels, kernels) = setup(dir.path(), 1, &[13], 1);
        fs::remove_file(labels.join("face_000.png")).unwrap();
        let err = build_manifest(
            &clear,
            &labels,
            &kernels,
            &DegradationConfig::default(),
            "synthetic",
            Split::Train,
        )
        .unwrap_err();
        assert!(err.to_string().contains("face_000"), "{err}");
    }

    #[test]
    fn overlapping_kernel_sets_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (clear, labels, kernels) = setup(dir.path(), 1, &[13], 2);
        let cfg = DegradationConfig::default();
        let all =
            build_manifest(&clear, &labels, &kernels, &cfg, "synthetic", Split::Train).unwrap();
        // {a, b} vs {b}: overlap on b
        let train = vec![all[0].clone(), all[1].clone()];
        let test = vec![all[1].clone()];
        let err = verify_disjoint_kernels(&train, &test).unwrap_err();
        assert!(matches!(err, Error::KernelOverlap(_)));
        // disjoint subsets pass
        verify_disjoint_kernels(&all[..1], &all[1..]).unwrap();
    }

    #[test]
    fn relative_paths_resolve_against_manifest_dir() {
        let dir = tempfile::tempdir().unwrap();
        let (clear, labels, kernels) = setup(dir.path(), 1, &[13], 1);
        let cfg = DegradationConfig::default();
        let entries =
            build_manifest(&clear, &labels, &kernels, &cfg, "synthetic", Split::Train).unwrap();
        let mut entries = materialize_blurred(&entries, dir.path()).unwrap();
        relativize_entries(&mut entries, dir.path());
        assert!(entries[0].clear.is_relative());
        let s = load_sample(&entries[0], Some(dir.path())).unwrap();
        assert_eq!(s.clear.height(), 32);
    }

    #[test]
    fn materialized_samples_load_and_validate() {
        let dir = tempfile::tempdir().unwrap();
        let (clear, labels, kernels) = setup(dir.path(), 1, &[13], 2);
        let cfg = DegradationConfig::default();
        let entries =
            build_manifest(&clear, &labels, &kernels, &cfg, "synthetic", Split::Test).unwrap();
        let entries = materialize_blurred(&entries, dir.path()).unwrap();
        for e in &entries {
            let s = load_sample(e, None).unwrap();
            assert_eq!(s.clear.height(), 32);
            assert!(s.blurred.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        // re-materializing is deterministic on disk
        let again = materialize_blurred(&entries, dir.path()).unwrap();
        let a = fs::read(&entries[0].blurred).unwrap();
        let b = fs::read(&again[0].blurred).unwrap();
        assert_eq!(a, b);
    }
}
