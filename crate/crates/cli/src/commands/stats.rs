use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use pcd_core::partition::{compute_density_stats, histogram_by_range, DensityStats};
use pcd_core::{PipelineConfig, PointCloud};

use super::{emit_json, region_spec};
use crate::RegionArgs;

#[derive(Serialize)]
struct HistogramRow {
    bin_start: f64,
    mean_count: f64,
}

#[derive(Serialize)]
struct StatsReport {
    n_scenes: usize,
    density_stats: DensityStats,
    histogram: Vec<HistogramRow>,
}

pub fn run(
    config: &PipelineConfig,
    input: &Path,
    region: &RegionArgs,
    bin_width: f64,
    csv: Option<&Path>,
) -> anyhow::Result<()> {
    let mut paths: Vec<_> = std::fs::read_dir(input)
        .with_context(|| format!("reading scan directory {}", input.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "bin"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        anyhow::bail!("no .bin scans under {}", input.display());
    }
    eprintln!("pcd: reading {} scans", paths.len());
    let clouds: Vec<PointCloud> = paths
        .iter()
        .map(pcd_core::kitti::read_velodyne)
        .collect::<pcd_core::Result<_>>()?;

    // statistics are defined over disjoint regions
    let spec = region_spec(config, region)?.with_overlap(0.0)?;
    let stats = compute_density_stats(&clouds, &spec)?;
    let histogram = histogram_by_range(&clouds, bin_width, spec.max_range, spec.metric)?;

    let rows: Vec<HistogramRow> = histogram
        .bin_starts()
        .zip(histogram.mean_counts.iter())
        .map(|(bin_start, &mean_count)| HistogramRow {
            bin_start,
            mean_count,
        })
        .collect();

    if let Some(csv_path) = csv {
        let mut out = String::from("bin_start,mean_count\n");
        for row in &rows {
            let _ = writeln!(out, "{},{}", row.bin_start, row.mean_count);
        }
        std::fs::write(csv_path, out)
            .with_context(|| format!("writing {}", csv_path.display()))?;
        eprintln!("pcd: histogram CSV written to {}", csv_path.display());
    }

    emit_json(&StatsReport {
        n_scenes: clouds.len(),
        density_stats: stats,
        histogram: rows,
    })
}
