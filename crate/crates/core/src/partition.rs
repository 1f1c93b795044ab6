//! Range partitioning of a scene into near/mid/far regions with configurable
//! overlap, and per-region point-count statistics over a dataset split.
//!
//! Range is measured along the LiDAR forward axis (+x) by default, matching
//! the car-centric forward field of view of KITTI scans; a Euclidean metric
//! is available behind a flag. The overlap attaches to the nearer region's
//! upper edge: with boundaries (20, 40) and overlap 5 the effective ranges
//! are 0-25, 20-45, 40-70. The far region gains no upper extension.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kitti::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RangeMetric {
    /// Distance along the sensor forward axis (LiDAR +x).
    #[default]
    Forward,
    /// Euclidean 3D distance from the sensor origin.
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    /// Region boundaries (b1, b2) in meters: near ends at b1, mid at b2.
    pub boundaries: (f64, f64),
    pub max_range: f64,
    /// Meters by which near and mid extend past their upper boundary.
    pub overlap: f64,
    pub metric: RangeMetric,
}

impl RegionSpec {
    pub fn new(b1: f64, b2: f64, max_range: f64, overlap: f64) -> Result<Self> {
        let spec = Self {
            boundaries: (b1, b2),
            max_range,
            overlap,
            metric: RangeMetric::Forward,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Training-phase defaults: boundaries 20/40 m, 70 m ceiling, 5 m overlap.
    pub fn train() -> Self {
        Self::new(20.0, 40.0, 70.0, 5.0).unwrap()
    }

    /// Inference-phase defaults: overlap shrinks to 3 m.
    pub fn inference() -> Self {
        Self::new(20.0, 40.0, 70.0, 3.0).unwrap()
    }

    pub fn with_metric(mut self, metric: RangeMetric) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_overlap(mut self, overlap: f64) -> Result<Self> {
        self.overlap = overlap;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let (b1, b2) = self.boundaries;
        if !(0.0 < b1 && b1 < b2 && b2 < self.max_range) {
            return Err(Error::Validation(format!(
                "boundaries must satisfy 0 < b1 < b2 < max_range, got ({b1}, {b2}, {})",
                self.max_range
            )));
        }
        if !(0.0..b2 - b1).contains(&self.overlap) {
            return Err(Error::Validation(format!(
                "overlap must lie in [0, b2 - b1), got {}",
                self.overlap
            )));
        }
        Ok(())
    }

    /// Range of a point under the configured metric.
    pub fn range_of(&self, p: [f64; 3]) -> f64 {
        match self.metric {
            RangeMetric::Forward => p[0],
            RangeMetric::Euclidean => (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt(),
        }
    }

    /// Region membership of a range value: (near, mid, far). Points behind
    /// the sensor or beyond `max_range` belong to no region.
    pub fn classify(&self, p: [f64; 3], range: f64) -> (bool, bool, bool) {
        if p[0] < 0.0 || range > self.max_range || range < 0.0 {
            return (false, false, false);
        }
        let (b1, b2) = self.boundaries;
        (
            range < b1 + self.overlap,
            b1 <= range && range < b2 + self.overlap,
            b2 <= range,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Near,
    Mid,
    Far,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Near, Region::Mid, Region::Far];

    pub fn index(self) -> usize {
        match self {
            Region::Near => 0,
            Region::Mid => 1,
            Region::Far => 2,
        }
    }
}

/// Index sets of a partitioned scene. With nonzero overlap a point may occur
/// in two adjacent regions; with zero overlap the sets are disjoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPartition {
    pub near: Vec<usize>,
    pub mid: Vec<usize>,
    pub far: Vec<usize>,
    pub spec: RegionSpec,
}

impl RegionPartition {
    pub fn region(&self, region: Region) -> &[usize] {
        match region {
            Region::Near => &self.near,
            Region::Mid => &self.mid,
            Region::Far => &self.far,
        }
    }

    pub fn counts(&self) -> [usize; 3] {
        [self.near.len(), self.mid.len(), self.far.len()]
    }
}

/// Assign every in-range point to its region(s).
pub fn partition_points(cloud: &PointCloud, spec: &RegionSpec) -> RegionPartition {
    let mut near = Vec::new();
    let mut mid = Vec::new();
    let mut far = Vec::new();
    for (i, p) in cloud.positions().enumerate() {
        let (n, m, f) = spec.classify(p, spec.range_of(p));
        if n {
            near.push(i);
        }
        if m {
            mid.push(i);
        }
        if f {
            far.push(i);
        }
    }
    RegionPartition {
        near,
        mid,
        far,
        spec: *spec,
    }
}

/// Per-region mean and population standard deviation of point counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityStats {
    pub mean: [f64; 3],
    pub sigma: [f64; 3],
    pub n_scenes: usize,
}

/// Count in-region points per scene and reduce to mean and population sigma.
/// Scenes are processed in parallel; the reduction is integer arithmetic, so
/// the result is identical for any thread count.
pub fn compute_density_stats(clouds: &[PointCloud], spec: &RegionSpec) -> Result<DensityStats> {
    if spec.overlap != 0.0 {
        return Err(Error::Validation(
            "density statistics require a zero-overlap region spec".into(),
        ));
    }
    if clouds.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 scenes for a standard deviation, got {}",
            clouds.len()
        )));
    }
    let counts: Vec<[u64; 3]> = clouds
        .par_iter()
        .map(|cloud| {
            let p = partition_points(cloud, spec);
            [p.near.len() as u64, p.mid.len() as u64, p.far.len() as u64]
        })
        .collect();
    let n = counts.len() as f64;
    let mut mean = [0.0; 3];
    let mut sigma = [0.0; 3];
    for k in 0..3 {
        let sum: u64 = counts.iter().map(|c| c[k]).sum();
        let sum_sq: u128 = counts.iter().map(|c| (c[k] as u128) * (c[k] as u128)).sum();
        let m = sum as f64 / n;
        mean[k] = m;
        sigma[k] = (sum_sq as f64 / n - m * m).max(0.0).sqrt();
    }
    Ok(DensityStats {
        mean,
        sigma,
        n_scenes: clouds.len(),
    })
}

/// Mean point count per range bin, averaged over scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeHistogram {
    pub bin_width: f64,
    pub max_range: f64,
    pub mean_counts: Vec<f64>,
}

impl RangeHistogram {
    pub fn bin_starts(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.mean_counts.len()).map(|k| k as f64 * self.bin_width)
    }
}

/// Histogram of mean point counts over `[k*w, (k+1)*w)` bins up to
/// `max_range`. A point at exactly `max_range` lands in the last bin.
pub fn histogram_by_range(
    clouds: &[PointCloud],
    bin_width: f64,
    max_range: f64,
    metric: RangeMetric,
) -> Result<RangeHistogram> {
    if bin_width.is_nan() || bin_width <= 0.0 {
        return Err(Error::Validation(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    if clouds.is_empty() {
        return Err(Error::InsufficientData("no scenes provided".into()));
    }
    let n_bins = (max_range / bin_width).ceil() as usize;
    let spec = RegionSpec {
        boundaries: (1.0, 2.0),
        max_range,
        overlap: 0.0,
        metric,
    };
    let per_scene: Vec<Vec<u64>> = clouds
        .par_iter()
        .map(|cloud| {
            let mut bins = vec![0u64; n_bins];
            for p in cloud.positions() {
                let r = spec.range_of(p);
                if p[0] < 0.0 || r < 0.0 || r > max_range {
                    continue;
                }
                let idx = ((r / bin_width) as usize).min(n_bins - 1);
                bins[idx] += 1;
            }
            bins
        })
        .collect();
    let n = clouds.len() as f64;
    let mean_counts = (0..n_bins)
        .map(|k| per_scene.iter().map(|b| b[k]).sum::<u64>() as f64 / n)
        .collect();
    Ok(RangeHistogram {
        bin_width,
        max_range,
        mean_counts,
    })
}
