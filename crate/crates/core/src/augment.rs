//! Scene augmentation: random flip, global scaling, global rotation, and
//! ground-truth insertion from a cross-scene database with overlap rejection.
//!
//! All operations are pure given a seed. Flip negates y (mirroring across
//! the forward axis), scaling is a similarity transform on points, box
//! centers, and box sizes, and rotation turns everything about +z. The
//! applied parameters are returned so a run can be reproduced or inverted.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{bev_iou, points_in_box, OrientedBox3D};
use crate::kitti::{read_velodyne, write_velodyne, GroundTruth, Point, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub flip_prob: f64,
    /// Uniform global scale factor range (lo, hi).
    pub scale_range: (f64, f64),
    /// Rotation drawn uniformly from [-rot_range, rot_range] radians.
    pub rot_range: f64,
    pub gtaug_max_inserts: usize,
    /// A database entry is rejected when its BEV IoU with any existing box
    /// exceeds this (strictly); zero demands disjoint footprints.
    pub gtaug_reject_iou: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            flip_prob: 0.5,
            scale_range: (0.95, 1.05),
            rot_range: std::f64::consts::FRAC_PI_4,
            gtaug_max_inserts: 10,
            gtaug_reject_iou: 0.0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::Validation(format!(
                "flip probability must lie in [0, 1], got {}",
                self.flip_prob
            )));
        }
        let (lo, hi) = self.scale_range;
        if !(0.0 < lo && lo <= hi) {
            return Err(Error::Validation(format!(
                "scale range must satisfy 0 < lo <= hi, got ({lo}, {hi})"
            )));
        }
        if self.rot_range.is_nan() || self.rot_range < 0.0 {
            return Err(Error::Validation(format!(
                "rotation range must be nonnegative, got {}",
                self.rot_range
            )));
        }
        if !(0.0..1.0).contains(&self.gtaug_reject_iou) {
            return Err(Error::Validation(format!(
                "rejection IoU must lie in [0, 1), got {}",
                self.gtaug_reject_iou
            )));
        }
        Ok(())
    }
}

/// Parameters actually applied to a scene, for reproducibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppliedOps {
    pub flipped: bool,
    pub scale: f64,
    pub rotation: f64,
}

fn transform_cloud(
    cloud: &PointCloud,
    flipped: bool,
    scale: f64,
    rotation: f64,
) -> PointCloud {
    let (s, c) = rotation.sin_cos();
    let points = cloud
        .points
        .iter()
        .map(|p| {
            let y0 = if flipped { -p.y } else { p.y };
            let x = p.x as f64 * scale;
            let y = y0 as f64 * scale;
            Point {
                x: (c * x - s * y) as f32,
                y: (s * x + c * y) as f32,
                z: (p.z as f64 * scale) as f32,
                r: p.r,
            }
        })
        .collect();
    PointCloud::new(points, cloud.frame_id.clone())
}

fn transform_box(bbox: &OrientedBox3D, flipped: bool, scale: f64, rotation: f64) -> OrientedBox3D {
    let mut out = *bbox;
    if flipped {
        out = out.flipped_y();
    }
    out.scaled(scale).rotated_z(rotation)
}

/// Apply flip/scale/rotation (in that order) with parameters drawn from the
/// seeded generator, returning the transformed scene and the draw record.
pub fn augment_scene(
    cloud: &PointCloud,
    boxes: &[OrientedBox3D],
    cfg: &AugmentConfig,
    seed: u64,
) -> Result<(PointCloud, Vec<OrientedBox3D>, AppliedOps)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flipped = rng.random_range(0.0..1.0) < cfg.flip_prob;
    let scale = rng.random_range(cfg.scale_range.0..=cfg.scale_range.1);
    let rotation = if cfg.rot_range == 0.0 {
        0.0
    } else {
        rng.random_range(-cfg.rot_range..=cfg.rot_range)
    };
    let ops = AppliedOps {
        flipped,
        scale,
        rotation,
    };
    let new_cloud = transform_cloud(cloud, flipped, scale, rotation);
    let new_boxes = boxes
        .iter()
        .map(|b| transform_box(b, flipped, scale, rotation))
        .collect();
    Ok((new_cloud, new_boxes, ops))
}

/// Replay a known parameter record (used by tests and the CLI to reproduce
/// or invert a draw).
pub fn apply_ops(
    cloud: &PointCloud,
    boxes: &[OrientedBox3D],
    ops: &AppliedOps,
) -> (PointCloud, Vec<OrientedBox3D>) {
    (
        transform_cloud(cloud, ops.flipped, ops.scale, ops.rotation),
        boxes
            .iter()
            .map(|b| transform_box(b, ops.flipped, ops.scale, ops.rotation))
            .collect(),
    )
}

/// One stored object: its box, the points cropped to it, and where it came
/// from.
#[derive(Debug, Clone, PartialEq)]
pub struct GtEntry {
    pub bbox: OrientedBox3D,
    pub points: PointCloud,
    pub source_frame: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GtDatabase {
    pub entries: Vec<GtEntry>,
}

#[derive(Serialize, Deserialize)]
struct DbIndexEntry {
    file: String,
    bbox: OrientedBox3D,
    source_frame: String,
    num_points: usize,
}

impl GtDatabase {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Persist as one velodyne-format file per entry plus a JSON index.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut index = Vec::with_capacity(self.entries.len());
        for (i, entry) in self.entries.iter().enumerate() {
            let file = format!("{i:06}.bin");
            write_velodyne(dir.join(&file), &entry.points)?;
            index.push(DbIndexEntry {
                file,
                bbox: entry.bbox,
                source_frame: entry.source_frame.clone(),
                num_points: entry.points.len(),
            });
        }
        let json = serde_json::to_string_pretty(&index)
            .map_err(|e| Error::Validation(format!("index serialization failed: {e}")))?;
        fs::write(dir.join("index.json"), json).map_err(|e| Error::io(dir, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let index_path = dir.join("index.json");
        let text = fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
        let index: Vec<DbIndexEntry> = serde_json::from_str(&text)
            .map_err(|e| Error::malformed(&index_path, format!("bad index: {e}")))?;
        let mut entries = Vec::with_capacity(index.len());
        for item in index {
            let points = read_velodyne(dir.join(&item.file))?;
            if points.len() != item.num_points {
                return Err(Error::malformed(
                    dir.join(&item.file),
                    format!(
                        "expected {} points per the index, found {}",
                        item.num_points,
                        points.len()
                    ),
                ));
            }
            entries.push(GtEntry {
                bbox: item.bbox,
                points,
                source_frame: item.source_frame,
            });
        }
        Ok(Self { entries })
    }

    /// A human-readable summary line per entry (debugging aid for the CLI).
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for (i, e) in self.entries.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i}: {} points from frame {} at ({:.1}, {:.1})",
                e.points.len(),
                e.source_frame,
                e.bbox.center[0],
                e.bbox.center[1]
            );
        }
        out
    }
}

/// Crop every labeled object of `class_label` with at least `min_points`
/// interior points into a database. An empty result is fine.
pub fn build_gt_database(
    scenes: &[(PointCloud, Vec<GroundTruth>)],
    class_label: &str,
    min_points: usize,
) -> GtDatabase {
    let mut entries = Vec::new();
    for (cloud, gts) in scenes {
        for gt in gts {
            let Some(bbox) = gt.box3d else { continue };
            if gt.class_label != class_label {
                continue;
            }
            let inside = points_in_box(cloud.positions(), &bbox, 0.0);
            if inside.len() < min_points {
                continue;
            }
            let points: Vec<Point> = inside.iter().map(|&i| cloud.points[i]).collect();
            entries.push(GtEntry {
                bbox,
                points: PointCloud::new(points, cloud.frame_id.clone()),
                source_frame: cloud.frame_id.clone(),
            });
        }
    }
    GtDatabase { entries }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtAugOutcome {
    pub cloud: PointCloud,
    pub boxes: Vec<OrientedBox3D>,
    pub inserted: usize,
    pub removed_points: usize,
}

/// Insert up to `gtaug_max_inserts` database objects at their stored poses.
/// A candidate whose footprint overlaps any existing or already-inserted box
/// is rejected. Scene points falling inside an accepted box are removed
/// before the object's points are appended.
pub fn gt_aug_insert(
    cloud: &PointCloud,
    boxes: &[OrientedBox3D],
    db: &GtDatabase,
    cfg: &AugmentConfig,
    seed: u64,
) -> Result<GtAugOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..db.entries.len()).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng);

    let mut all_boxes: Vec<OrientedBox3D> = boxes.to_vec();
    let mut accepted: Vec<&GtEntry> = Vec::new();
    for i in order {
        if accepted.len() == cfg.gtaug_max_inserts {
            break;
        }
        let candidate = &db.entries[i];
        let overlaps = all_boxes
            .iter()
            .any(|b| bev_iou(b, &candidate.bbox) > cfg.gtaug_reject_iou);
        if overlaps {
            continue;
        }
        all_boxes.push(candidate.bbox);
        accepted.push(candidate);
    }

    let inserted_boxes: Vec<&OrientedBox3D> =
        all_boxes[boxes.len()..].iter().collect();
    let mut points: Vec<Point> = Vec::with_capacity(cloud.len());
    let mut removed = 0usize;
    for p in &cloud.points {
        let occluded = inserted_boxes.iter().any(|b| b.contains(p.xyz(), 0.0));
        if occluded {
            removed += 1;
        } else {
            points.push(*p);
        }
    }
    for entry in &accepted {
        points.extend_from_slice(&entry.points.points);
    }
    let inserted = accepted.len();
    Ok(GtAugOutcome {
        cloud: PointCloud::new(points, cloud.frame_id.clone()),
        boxes: all_boxes,
        inserted,
        removed_points: removed,
    })
}
