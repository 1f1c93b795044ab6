use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use pcd_core::augment::{
    augment_scene, build_gt_database, gt_aug_insert, AppliedOps, AugmentConfig, GtDatabase,
};
use pcd_core::{Calibration, GroundTruth, OrientedBox3D, PipelineConfig, PointCloud};

use super::emit_json;

pub struct Request<'a> {
    pub config: &'a PipelineConfig,
    pub input: &'a Path,
    pub labels: Option<&'a Path>,
    pub calib: Option<&'a Path>,
    pub flip_prob: Option<f64>,
    pub scale: Option<(f64, f64)>,
    pub rot: Option<f64>,
    pub gtaug: Option<usize>,
    pub db: Option<&'a Path>,
    pub build_db: bool,
    pub min_points: usize,
    pub seed: u64,
    pub output: Option<&'a Path>,
}

#[derive(Serialize)]
struct AugmentReport {
    frame_id: String,
    applied: AppliedOps,
    points_before: usize,
    points_after: usize,
    boxes_before: usize,
    boxes_after: usize,
    gtaug_inserted: usize,
    gtaug_removed_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<String>,
}

#[derive(Serialize)]
struct BuildDbReport {
    scenes: usize,
    entries: usize,
    db: String,
}

/// Load `(cloud, labels)` for one KITTI-style frame.
fn load_frame(
    scan: &Path,
    labels: Option<&Path>,
    calib: Option<&Path>,
) -> anyhow::Result<(PointCloud, Vec<GroundTruth>)> {
    let cloud = pcd_core::kitti::read_velodyne(scan)?;
    let gts = match (labels, calib) {
        (Some(l), Some(c)) => {
            let calibration: Calibration = pcd_core::kitti::read_calibration(c)?;
            pcd_core::kitti::read_labels(l, &calibration)?
        }
        (None, None) => Vec::new(),
        _ => anyhow::bail!("--labels and --calib must be given together"),
    };
    Ok((cloud, gts))
}

fn build_database(root: &Path, db_dir: &Path, min_points: usize) -> anyhow::Result<BuildDbReport> {
    let velodyne = root.join("velodyne");
    let label_dir = root.join("label_2");
    let calib_dir = root.join("calib");
    let mut frames: Vec<String> = std::fs::read_dir(&velodyne)
        .with_context(|| format!("reading {}", velodyne.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "bin"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    frames.sort();
    let mut scenes = Vec::with_capacity(frames.len());
    for frame in &frames {
        let (cloud, gts) = load_frame(
            &velodyne.join(format!("{frame}.bin")),
            Some(&label_dir.join(format!("{frame}.txt"))),
            Some(&calib_dir.join(format!("{frame}.txt"))),
        )?;
        scenes.push((cloud, gts));
    }
    let db = build_gt_database(&scenes, "Car", min_points);
    db.save(db_dir)?;
    Ok(BuildDbReport {
        scenes: scenes.len(),
        entries: db.len(),
        db: db_dir.display().to_string(),
    })
}

pub fn run(req: Request<'_>) -> anyhow::Result<()> {
    if req.build_db {
        let db_dir = req
            .db
            .ok_or_else(|| anyhow::anyhow!("--build-db needs --db for the output directory"))?;
        let report = build_database(req.input, db_dir, req.min_points)?;
        eprintln!(
            "pcd: stored {} entries from {} scenes",
            report.entries, report.scenes
        );
        return emit_json(&report);
    }

    let mut cfg: AugmentConfig = req.config.augment;
    if let Some(p) = req.flip_prob {
        cfg.flip_prob = p;
    }
    if let Some(s) = req.scale {
        cfg.scale_range = s;
    }
    if let Some(r) = req.rot {
        cfg.rot_range = r;
    }
    if let Some(n) = req.gtaug {
        cfg.gtaug_max_inserts = n;
    }
    cfg.validate()?;

    let (cloud, gts) = load_frame(req.input, req.labels, req.calib)?;
    let boxes: Vec<OrientedBox3D> = gts.iter().filter_map(|g| g.box3d).collect();

    let (mut out_cloud, mut out_boxes, applied) = augment_scene(&cloud, &boxes, &cfg, req.seed)?;
    let mut inserted = 0;
    let mut removed = 0;
    if let Some(db_dir) = req.db {
        let db = GtDatabase::load(db_dir)?;
        let outcome = gt_aug_insert(&out_cloud, &out_boxes, &db, &cfg, req.seed)?;
        inserted = outcome.inserted;
        removed = outcome.removed_points;
        out_cloud = outcome.cloud;
        out_boxes = outcome.boxes;
    }

    if let Some(path) = req.output {
        pcd_core::kitti::write_velodyne(path, &out_cloud)?;
        eprintln!("pcd: augmented scan written to {}", path.display());
    }

    emit_json(&AugmentReport {
        frame_id: cloud.frame_id.clone(),
        applied,
        points_before: cloud.len(),
        points_after: out_cloud.len(),
        boxes_before: boxes.len(),
        boxes_after: out_boxes.len(),
        gtaug_inserted: inserted,
        gtaug_removed_points: removed,
        output: req.output.map(|p| p.display().to_string()),
    })
}
