//! Detection evaluation: BEV non-maximum suppression, KITTI difficulty
//! bucketing, and Average Precision at a fixed IoU threshold with 11-point
//! or 40-point recall interpolation.
//!
//! Matching follows the KITTI protocol: detections are processed in
//! descending score order, each may claim one unmatched ground truth with
//! IoU at or above the threshold, and ground truths that are DontCare or
//! harder than the evaluated difficulty are ignored — detections matched to
//! them count neither as true nor as false positives.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{bev_iou, iou_3d, OrientedBox3D};
use crate::kitti::GroundTruth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: OrientedBox3D,
    pub score: f64,
    pub frame_id: String,
}

impl Detection {
    pub fn new(bbox: OrientedBox3D, score: f64, frame_id: impl Into<String>) -> Result<Self> {
        if !score.is_finite() {
            return Err(Error::Validation(format!(
                "detection score must be finite, got {score}"
            )));
        }
        Ok(Self {
            bbox,
            score,
            frame_id: frame_id.into(),
        })
    }
}

/// Greedy BEV non-maximum suppression. Returns indices of kept detections in
/// descending score order (score ties keep the earlier index first). A
/// detection is suppressed when its BEV IoU with an already-kept detection
/// strictly exceeds the threshold.
pub fn nms_bev(dets: &[Detection], iou_threshold: f64) -> Result<Vec<usize>> {
    if !(0.0 < iou_threshold && iou_threshold < 1.0) {
        return Err(Error::Validation(format!(
            "NMS threshold must lie in (0, 1), got {iou_threshold}"
        )));
    }
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .total_cmp(&dets[a].score)
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let suppressed = kept
            .iter()
            .any(|&k| bev_iou(&dets[k].bbox, &dets[i].bbox) > iou_threshold);
        if !suppressed {
            kept.push(i);
        }
    }
    Ok(kept)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Moderate,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelThresholds {
    pub min_height_px: f64,
    pub max_occlusion: i32,
    pub max_truncation: f64,
}

/// KITTI-convention difficulty thresholds; monotone across levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyRules {
    pub easy: LevelThresholds,
    pub moderate: LevelThresholds,
    pub hard: LevelThresholds,
}

impl Default for DifficultyRules {
    fn default() -> Self {
        Self {
            easy: LevelThresholds {
                min_height_px: 40.0,
                max_occlusion: 0,
                max_truncation: 0.15,
            },
            moderate: LevelThresholds {
                min_height_px: 25.0,
                max_occlusion: 1,
                max_truncation: 0.30,
            },
            hard: LevelThresholds {
                min_height_px: 25.0,
                max_occlusion: 2,
                max_truncation: 0.50,
            },
        }
    }
}

impl DifficultyRules {
    pub fn validate(&self) -> Result<()> {
        let levels = [&self.easy, &self.moderate, &self.hard];
        for w in levels.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a.min_height_px < b.min_height_px
                || a.max_occlusion > b.max_occlusion
                || a.max_truncation > b.max_truncation
            {
                return Err(Error::Validation(
                    "difficulty thresholds must relax monotonically across levels".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn level(&self, d: Difficulty) -> &LevelThresholds {
        match d {
            Difficulty::Easy => &self.easy,
            Difficulty::Moderate => &self.moderate,
            Difficulty::Hard => &self.hard,
        }
    }
}

/// The easiest difficulty whose thresholds the ground truth satisfies, or
/// `None` when it fails all three (such objects are excluded from the metric
/// denominator).
pub fn assign_difficulty(gt: &GroundTruth, rules: &DifficultyRules) -> Option<Difficulty> {
    let height = gt.bbox_height();
    Difficulty::ALL.into_iter().find(|&d| {
        let t = rules.level(d);
        height >= t.min_height_px
            && gt.occlusion <= t.max_occlusion
            && gt.truncation <= t.max_truncation
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApMode {
    R11,
    R40,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IouKind {
    #[serde(rename = "3d")]
    Iou3d,
    #[serde(rename = "bev")]
    Bev,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    pub mode: ApMode,
    pub kind: IouKind,
    pub rules: DifficultyRules,
    pub class_label: String,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.7,
            mode: ApMode::R11,
            kind: IouKind::Iou3d,
            rules: DifficultyRules::default(),
            class_label: "Car".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DetOutcome {
    TruePositive,
    FalsePositive,
    Ignored,
}

/// Average Precision over all frames at one difficulty level, in [0, 100].
pub fn average_precision(
    dets: &[Detection],
    gts: &BTreeMap<String, Vec<GroundTruth>>,
    level: Difficulty,
    cfg: &EvalConfig,
) -> Result<f64> {
    if !(0.0 < cfg.iou_threshold && cfg.iou_threshold < 1.0) {
        return Err(Error::Validation(format!(
            "IoU threshold must lie in (0, 1), got {}",
            cfg.iou_threshold
        )));
    }
    cfg.rules.validate()?;
    let iou = |a: &OrientedBox3D, b: &OrientedBox3D| match cfg.kind {
        IouKind::Iou3d => iou_3d(a, b),
        IouKind::Bev => bev_iou(a, b),
    };

    // Global processing order: score descending, ties by (frame, index).
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .total_cmp(&dets[a].score)
            .then_with(|| dets[a].frame_id.cmp(&dets[b].frame_id))
            .then(a.cmp(&b))
    });

    // Split each frame's ground truths into valid (counted) and ignored.
    struct FrameGts {
        valid: Vec<(OrientedBox3D, bool)>,   // (box, matched)
        ignored: Vec<(OrientedBox3D, bool)>, // (box, matched)
    }
    let mut frames: BTreeMap<&str, FrameGts> = BTreeMap::new();
    let mut n_valid = 0usize;
    for (frame, gt_list) in gts {
        let mut valid = Vec::new();
        let mut ignored = Vec::new();
        for gt in gt_list {
            let Some(bbox) = gt.box3d else { continue }; // DontCare rows carry no 3D box
            if gt.class_label != cfg.class_label {
                continue;
            }
            match assign_difficulty(gt, &cfg.rules) {
                Some(d) if d <= level => valid.push((bbox, false)),
                _ => ignored.push((bbox, false)),
            }
        }
        n_valid += valid.len();
        frames.insert(frame.as_str(), FrameGts { valid, ignored });
    }
    if n_valid == 0 {
        return Err(Error::UndefinedMetric(format!(
            "no valid {} ground truths at {level:?} difficulty",
            cfg.class_label
        )));
    }

    let mut outcomes = Vec::with_capacity(dets.len());
    for idx in order {
        let det = &dets[idx];
        let Some(frame) = frames.get_mut(det.frame_id.as_str()) else {
            return Err(Error::Validation(format!(
                "detection frame {} has no ground-truth record",
                det.frame_id
            )));
        };
        // best unmatched valid ground truth at or above the threshold
        let mut best: Option<(usize, f64)> = None;
        for (g, (bbox, matched)) in frame.valid.iter().enumerate() {
            if *matched {
                continue;
            }
            let v = iou(&det.bbox, bbox);
            if v >= cfg.iou_threshold && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            frame.valid[g].1 = true;
            outcomes.push(DetOutcome::TruePositive);
            continue;
        }
        // otherwise it may overlap an ignored ground truth
        let mut hit_ignored = false;
        for (bbox, matched) in frame.ignored.iter_mut() {
            if !*matched && iou(&det.bbox, bbox) >= cfg.iou_threshold {
                *matched = true;
                hit_ignored = true;
                break;
            }
        }
        outcomes.push(if hit_ignored {
            DetOutcome::Ignored
        } else {
            DetOutcome::FalsePositive
        });
    }

    // precision/recall staircase over the counted detections
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut curve: Vec<(f64, f64)> = Vec::new(); // (recall, precision)
    for outcome in outcomes {
        match outcome {
            DetOutcome::TruePositive => tp += 1,
            DetOutcome::FalsePositive => fp += 1,
            DetOutcome::Ignored => continue,
        }
        curve.push((
            tp as f64 / n_valid as f64,
            tp as f64 / (tp + fp) as f64,
        ));
    }

    Ok(interpolate_ap(&curve, cfg.mode))
}

/// Interpolated AP: mean over the recall sample points of the maximum
/// precision at recall >= r, as a percentage.
fn interpolate_ap(curve: &[(f64, f64)], mode: ApMode) -> f64 {
    let samples: Vec<f64> = match mode {
        ApMode::R11 => (0..=10).map(|k| k as f64 / 10.0).collect(),
        ApMode::R40 => (1..=40).map(|k| k as f64 / 40.0).collect(),
    };
    let mut total = 0.0;
    for r in &samples {
        let best = curve
            .iter()
            .filter(|(recall, _)| recall + 1e-12 >= *r)
            .map(|(_, precision)| *precision)
            .fold(0.0, f64::max);
        total += best;
    }
    100.0 * total / samples.len() as f64
}
