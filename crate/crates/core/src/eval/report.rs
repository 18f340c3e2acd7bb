//! Benchmark reports: per-sample PSNR/SSIM grouped by kernel size, with
//! CSV/JSON outputs and side-by-side image grids.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::manifest::{load_sample, ManifestEntry};
use crate::error::{Error, Result};
use crate::eval::metrics::{psnr, ssim};
use crate::image::Image;
use crate::parallel;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleMetric {
    pub source_id: String,
    pub kernel_id: String,
    pub kernel_size: usize,
    pub psnr_restored: f64,
    pub ssim_restored: f64,
    pub psnr_blurred: f64,
    pub ssim_blurred: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GroupAggregate {
    /// 0 for the overall row.
    pub kernel_size: usize,
    pub count: usize,
    pub mean_psnr: f64,
    pub std_psnr: f64,
    pub worst_psnr: f64,
    pub mean_ssim: f64,
    pub std_ssim: f64,
    pub worst_ssim: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub samples: Vec<SampleMetric>,
    pub groups: Vec<GroupAggregate>,
    pub overall: GroupAggregate,
    pub blurred_groups: Vec<GroupAggregate>,
    pub blurred_overall: GroupAggregate,
}

fn aggregate_values(kernel_size: usize, values: &[(f64, f64)]) -> GroupAggregate {
    let n = values.len() as f64;
    let mean = |sel: fn(&(f64, f64)) -> f64| values.iter().map(sel).sum::<f64>() / n;
    let mean_psnr = mean(|v| v.0);
    let mean_ssim = mean(|v| v.1);
    let var = |sel: fn(&(f64, f64)) -> f64, m: f64| {
        values.iter().map(|v| (sel(v) - m).powi(2)).sum::<f64>() / n
    };
    GroupAggregate {
        kernel_size,
        count: values.len(),
        mean_psnr,
        std_psnr: var(|v| v.0, mean_psnr).sqrt(),
        worst_psnr: values.iter().map(|v| v.0).fold(f64::INFINITY, f64::min),
        mean_ssim,
        std_ssim: var(|v| v.1, mean_ssim).sqrt(),
        worst_ssim: values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min),
    }
}

/// Group per-sample metrics by kernel size and add an overall row; the
/// overall mean is the sample-count-weighted mean of the group means.
pub fn aggregate(samples: &[SampleMetric]) -> Result<MetricReport> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples to aggregate"));
    }
    let mut restored_by_size: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    let mut blurred_by_size: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for s in samples {
        restored_by_size
            .entry(s.kernel_size)
            .or_default()
            .push((s.psnr_restored, s.ssim_restored));
        blurred_by_size
            .entry(s.kernel_size)
            .or_default()
            .push((s.psnr_blurred, s.ssim_blurred));
    }
    let groups: Vec<GroupAggregate> = restored_by_size
        .iter()
        .map(|(size, vals)| aggregate_values(*size, vals))
        .collect();
    let blurred_groups: Vec<GroupAggregate> = blurred_by_size
        .iter()
        .map(|(size, vals)| aggregate_values(*size, vals))
        .collect();
    let all_restored: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| (s.psnr_restored, s.ssim_restored))
        .collect();
    let all_blurred: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| (s.psnr_blurred, s.ssim_blurred))
        .collect();
    Ok(MetricReport {
        samples: samples.to_vec(),
        groups,
        overall: aggregate_values(0, &all_restored),
        blurred_groups,
        blurred_overall: aggregate_values(0, &all_blurred),
    })
}

/// Evaluate `restore` over every manifest entry, grouped by kernel size.
/// Writes `report.csv` (per-size layout), `summary.csv` (average/worst
/// layout), `report.json`, and up to `grid_limit` side-by-side PNG grids
/// (blurred | restored | ground truth).
pub fn benchmark_report<F>(
    entries: &[ManifestEntry],
    manifest_base: Option<&Path>,
    restore: F,
    out_dir: &Path,
    grid_limit: usize,
) -> Result<MetricReport>
where
    F: Fn(&Image) -> Result<Image> + Sync,
{
    if entries.is_empty() {
        return Err(Error::invalid("empty manifest"));
    }
    fs::create_dir_all(out_dir)?;
    let results: Vec<Result<(SampleMetric, Image, Image, Image)>> =
        parallel::map_indexed(entries.len(), |i| {
            let entry = &entries[i];
            let sample = load_sample(entry, manifest_base)?;
            let restored = restore(&sample.blurred)?;
            let metric = SampleMetric {
                source_id: entry.source_id.clone(),
                kernel_id: entry.kernel_id.clone(),
                kernel_size: entry.kernel_size,
                psnr_restored: psnr(&restored, &sample.clear, 1.0)?,
                ssim_restored: ssim(&restored, &sample.clear, 1.0)?,
                psnr_blurred: psnr(&sample.blurred, &sample.clear, 1.0)?,
                ssim_blurred: ssim(&sample.blurred, &sample.clear, 1.0)?,
            };
            Ok((metric, sample.blurred, restored, sample.clear))
        });

    let mut metrics = Vec::with_capacity(entries.len());
    let grid_dir = out_dir.join("grids");
    fs::create_dir_all(&grid_dir)?;
    for (i, r) in results.into_iter().enumerate() {
        let (metric, blurred, restored, clear) = r?;
        if i < grid_limit {
            let grid = side_by_side(&[&blurred, &restored, &clear]);
            grid.save_png(grid_dir.join(format!(
                "{}__{}.png",
                metric.source_id, metric.kernel_id
            )))?;
        }
        metrics.push(metric);
    }

    let report = aggregate(&metrics)?;
    write_csv(&report, &out_dir.join("report.csv"))?;
    write_summary_csv(&report, &out_dir.join("summary.csv"))?;
    fs::write(
        out_dir.join("report.json"),
        serde_json::to_vec_pretty(&report)?,
    )?;
    Ok(report)
}

/// Rows = methods, columns = kernel sizes x {PSNR, SSIM}.
fn write_csv(report: &MetricReport, path: &Path) -> Result<()> {
    let mut header = String::from("method");
    for g in &report.groups {
        header.push_str(&format!(",psnr_{0},ssim_{0}", g.kernel_size));
    }
    let mut lines = vec![header];
    for (name, groups) in [
        ("blurred", &report.blurred_groups),
        ("restored", &report.groups),
    ] {
        let mut line = String::from(name);
        for g in groups {
            line.push_str(&format!(",{:.4},{:.4}", g.mean_psnr, g.mean_ssim));
        }
        lines.push(line);
    }
    fs::write(path, lines.join("\n") + "\n")?;
    Ok(())
}

/// Average/worst layout over all samples.
fn write_summary_csv(report: &MetricReport, path: &Path) -> Result<()> {
    let mut lines = vec![
        "method,avg_psnr,std_psnr,worst_psnr,avg_ssim,std_ssim,worst_ssim".to_string(),
    ];
    for (name, o) in [
        ("blurred", &report.blurred_overall),
        ("restored", &report.overall),
    ] {
        lines.push(format!(
            "{name},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            o.mean_psnr, o.std_psnr, o.worst_psnr, o.mean_ssim, o.std_ssim, o.worst_ssim
        ));
    }
    fs::write(path, lines.join("\n") + "\n")?;
    Ok(())
}

/// Horizontal concatenation with a 2 px white separator.
pub fn side_by_side(images: &[&Image]) -> Image {
    let h = images.iter().map(|i| i.height()).max().unwrap();
    let sep = 2usize;
    let w: usize =
        images.iter().map(|i| i.width()).sum::<usize>() + sep * (images.len() - 1);
    let mut out = Image::constant(h, w, 3, 1.0);
    let mut x0 = 0;
    for img in images {
        for y in 0..img.height() {
            for x in 0..img.width() {
                for c in 0..3 {
                    let v = if img.channels() == 3 {
                        img.get(y, x, c)
                    } else {
                        img.get(y, x, 0)
                    };
                    out.set(y, x0 + x, c, v);
                }
            }
        }
        x0 += img.width() + sep;
    }
    out
}
