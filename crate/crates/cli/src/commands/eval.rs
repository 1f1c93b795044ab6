use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use pcd_core::eval::{average_precision, ApMode, EvalConfig, IouKind};
use pcd_core::{Detection, Difficulty, GroundTruth, OrientedBox3D, PipelineConfig};

use super::emit_json;
use crate::{KindArg, ModeArg};

#[derive(Serialize)]
struct EvalReport {
    class: String,
    iou_threshold: f64,
    mode: ApMode,
    kind: IouKind,
    frames: usize,
    detections: usize,
    easy: f64,
    moderate: f64,
    hard: f64,
}

/// One detection per line: `score x y z l w h yaw` in the LiDAR frame.
fn read_detection_file(path: &Path, frame_id: &str) -> anyhow::Result<Vec<Detection>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading detections {}", path.display()))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("{}:{}: bad float", path.display(), lineno + 1))?;
        if vals.len() != 8 {
            anyhow::bail!(
                "{}:{}: expected 8 values (score x y z l w h yaw), got {}",
                path.display(),
                lineno + 1,
                vals.len()
            );
        }
        let bbox = OrientedBox3D::new([vals[1], vals[2], vals[3]], [vals[4], vals[5], vals[6]], vals[7])?;
        out.push(Detection::new(bbox, vals[0], frame_id)?);
    }
    Ok(out)
}

pub fn run(
    config: &PipelineConfig,
    dets_dir: &Path,
    gts_dir: &Path,
    iou: f64,
    mode: ModeArg,
    kind: KindArg,
) -> anyhow::Result<()> {
    let label_dir = gts_dir.join("label_2");
    let calib_dir = gts_dir.join("calib");
    let mut frames: Vec<String> = std::fs::read_dir(&label_dir)
        .with_context(|| format!("reading {}", label_dir.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    frames.sort();
    if frames.is_empty() {
        anyhow::bail!("no label files under {}", label_dir.display());
    }

    let mut gts: BTreeMap<String, Vec<GroundTruth>> = BTreeMap::new();
    for frame in &frames {
        let calib = pcd_core::kitti::read_calibration(calib_dir.join(format!("{frame}.txt")))?;
        let labels =
            pcd_core::kitti::read_labels(label_dir.join(format!("{frame}.txt")), &calib)?;
        gts.insert(frame.clone(), labels);
    }

    let mut dets: Vec<Detection> = Vec::new();
    for frame in &frames {
        let path = dets_dir.join(format!("{frame}.txt"));
        if path.exists() {
            dets.extend(read_detection_file(&path, frame)?);
        }
    }

    let cfg = EvalConfig {
        iou_threshold: iou,
        mode: match mode {
            ModeArg::R11 => ApMode::R11,
            ModeArg::R40 => ApMode::R40,
        },
        kind: match kind {
            KindArg::ThreeD => IouKind::Iou3d,
            KindArg::Bev => IouKind::Bev,
        },
        rules: config.difficulty,
        class_label: "Car".into(),
    };

    let ap = |level| average_precision(&dets, &gts, level, &cfg);
    emit_json(&EvalReport {
        class: cfg.class_label.clone(),
        iou_threshold: cfg.iou_threshold,
        mode: cfg.mode,
        kind: cfg.kind,
        frames: frames.len(),
        detections: dets.len(),
        easy: ap(Difficulty::Easy)?,
        moderate: ap(Difficulty::Moderate)?,
        hard: ap(Difficulty::Hard)?,
    })
}
