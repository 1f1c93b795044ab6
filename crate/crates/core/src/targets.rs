//! Bin-based box regression targets and the detector loss formulas, as pure
//! math with hand-derived gradients.
//!
//! Box regression splits each horizontal center offset and the yaw into a
//! coarse bin classification plus a normalized residual in [-0.5, 0.5);
//! the vertical offset is a direct residual and sizes are log-ratios to a
//! class mean. Encoding and decoding are exact inverses while residuals stay
//! real-valued.
//!
//! The loss surface: a focal term for foreground/background classification,
//! cross-entropy over bins plus smooth-L1 over residuals averaged across
//! foreground points for proposal regression, and a mean cross-entropy plus
//! bin/residual term for proposal refinement. All reductions sort their
//! addends first, so results are exactly permutation-invariant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, OrientedBox3D};

/// Focal loss parameters: weight `alpha_t` in (0, 1], focusing exponent
/// `gamma` >= 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalParams {
    pub alpha_t: f64,
    pub gamma: f64,
}

impl Default for FocalParams {
    fn default() -> Self {
        Self {
            alpha_t: 0.25,
            gamma: 2.0,
        }
    }
}

impl FocalParams {
    pub fn new(alpha_t: f64, gamma: f64) -> Result<Self> {
        if !(0.0 < alpha_t && alpha_t <= 1.0) {
            return Err(Error::Validation(format!(
                "alpha_t must lie in (0, 1], got {alpha_t}"
            )));
        }
        if gamma.is_nan() || gamma < 0.0 {
            return Err(Error::Validation(format!(
                "gamma must be nonnegative, got {gamma}"
            )));
        }
        Ok(Self { alpha_t, gamma })
    }
}

/// `-alpha_t * (1 - p_t)^gamma * ln(p_t)` for `p_t` in (0, 1).
pub fn focal_loss(p_t: f64, params: &FocalParams) -> Result<f64> {
    if !(0.0 < p_t && p_t < 1.0) {
        return Err(Error::Domain(format!(
            "focal loss needs p_t in (0, 1), got {p_t}"
        )));
    }
    Ok(-params.alpha_t * (1.0 - p_t).powf(params.gamma) * p_t.ln())
}

/// Analytic derivative of `focal_loss` with respect to `p_t`.
pub fn focal_loss_grad(p_t: f64, params: &FocalParams) -> Result<f64> {
    if !(0.0 < p_t && p_t < 1.0) {
        return Err(Error::Domain(format!(
            "focal loss needs p_t in (0, 1), got {p_t}"
        )));
    }
    let a = params.alpha_t;
    let g = params.gamma;
    let q = 1.0 - p_t;
    // d/dp [-a q^g ln p] = a g q^(g-1) ln p - a q^g / p
    Ok(a * g * q.powf(g - 1.0) * p_t.ln() - a * q.powf(g) / p_t)
}

/// Smooth L1 (Huber with unit transition, in normalized residual units).
pub fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

pub fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

/// `-ln(probs[target])` over a categorical distribution.
pub fn cross_entropy(probs: &[f64], target: usize) -> Result<f64> {
    if target >= probs.len() {
        return Err(Error::Validation(format!(
            "target bin {target} out of range for {} bins",
            probs.len()
        )));
    }
    let p = probs[target];
    if !(0.0 < p && p <= 1.0) {
        return Err(Error::Domain(format!(
            "probability of the target bin must lie in (0, 1], got {p}"
        )));
    }
    Ok(-p.ln())
}

/// Derivative of `cross_entropy` with respect to the target-bin probability.
pub fn cross_entropy_grad(probs: &[f64], target: usize) -> Result<f64> {
    if target >= probs.len() {
        return Err(Error::Validation(format!(
            "target bin {target} out of range for {} bins",
            probs.len()
        )));
    }
    let p = probs[target];
    if !(0.0 < p && p <= 1.0) {
        return Err(Error::Domain(format!(
            "probability of the target bin must lie in (0, 1], got {p}"
        )));
    }
    Ok(-1.0 / p)
}

/// Bin layout for target encoding: horizontal offsets are searched within
/// `search_range` meters of the proposal at `bin_size` resolution, yaw over
/// the full circle in `num_angle_bins` bins, sizes against `mean_size`
/// (length, width, height).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinConfig {
    pub search_range: f64,
    pub bin_size: f64,
    pub num_angle_bins: usize,
    pub mean_size: [f64; 3],
}

impl Default for BinConfig {
    fn default() -> Self {
        Self {
            search_range: 3.0,
            bin_size: 0.5,
            num_angle_bins: 12,
            mean_size: [3.9, 1.6, 1.56],
        }
    }
}

impl BinConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.search_range > 0.0 && self.bin_size > 0.0) {
            return Err(Error::Validation(
                "search range and bin size must be positive".into(),
            ));
        }
        let bins = 2.0 * self.search_range / self.bin_size;
        if (bins - bins.round()).abs() > 1e-9 || bins.round() < 1.0 {
            return Err(Error::Validation(format!(
                "2 * search_range / bin_size must be a positive integer, got {bins}"
            )));
        }
        if self.num_angle_bins == 0 {
            return Err(Error::Validation("need at least one angle bin".into()));
        }
        if self.mean_size.iter().any(|s| *s <= 0.0) {
            return Err(Error::Validation("mean size must be positive".into()));
        }
        Ok(())
    }

    /// Number of bins per horizontal axis.
    pub fn num_center_bins(&self) -> usize {
        (2.0 * self.search_range / self.bin_size).round() as usize
    }

    pub fn angle_bin_width(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.num_angle_bins as f64
    }
}

/// A box regression target: bins and residuals relative to a proposal center.
/// Residual fields are normalized to [-0.5, 0.5) except the vertical offset
/// (meters) and sizes (log-ratios).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodedTarget {
    pub bin_x: usize,
    pub res_x: f64,
    pub bin_y: usize,
    pub res_y: f64,
    pub res_z: f64,
    pub bin_yaw: usize,
    pub res_yaw: f64,
    /// log(size / mean_size) per axis (length, width, height).
    pub res_size: [f64; 3],
}

impl EncodedTarget {
    /// The seven residual values in fixed order (x, y, z, yaw, l, w, h).
    pub fn residuals(&self) -> [f64; 7] {
        [
            self.res_x,
            self.res_y,
            self.res_z,
            self.res_yaw,
            self.res_size[0],
            self.res_size[1],
            self.res_size[2],
        ]
    }
}

/// Encoding outcome: ground truths outside the search range are flagged, not
/// errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinTarget {
    Encoded(EncodedTarget),
    OutOfRange,
}

fn encode_axis(delta: f64, cfg: &BinConfig) -> Option<(usize, f64)> {
    if delta < -cfg.search_range || delta >= cfg.search_range {
        return None;
    }
    let shifted = delta + cfg.search_range;
    let bin = (shifted / cfg.bin_size).floor() as usize;
    let bin = bin.min(cfg.num_center_bins() - 1);
    let res = (shifted - (bin as f64 + 0.5) * cfg.bin_size) / cfg.bin_size;
    Some((bin, res))
}

/// Encode a ground-truth box against a proposal center.
pub fn encode_bin_targets(
    proposal_center: [f64; 3],
    gt: &OrientedBox3D,
    cfg: &BinConfig,
) -> Result<BinTarget> {
    cfg.validate()?;
    let dx = gt.center[0] - proposal_center[0];
    let dy = gt.center[1] - proposal_center[1];
    let (Some((bin_x, res_x)), Some((bin_y, res_y))) = (encode_axis(dx, cfg), encode_axis(dy, cfg))
    else {
        return Ok(BinTarget::OutOfRange);
    };
    let res_z = gt.center[2] - proposal_center[2];

    // yaw binned over the full circle with a centered residual
    let two_pi = 2.0 * std::f64::consts::PI;
    let theta = gt.yaw.rem_euclid(two_pi);
    let width = cfg.angle_bin_width();
    let bin_yaw = ((theta / width).floor() as usize).min(cfg.num_angle_bins - 1);
    let res_yaw = (theta - (bin_yaw as f64 + 0.5) * width) / width;

    let res_size = [
        (gt.size[0] / cfg.mean_size[0]).ln(),
        (gt.size[1] / cfg.mean_size[1]).ln(),
        (gt.size[2] / cfg.mean_size[2]).ln(),
    ];
    Ok(BinTarget::Encoded(EncodedTarget {
        bin_x,
        res_x,
        bin_y,
        res_y,
        res_z,
        bin_yaw,
        res_yaw,
        res_size,
    }))
}

/// Invert `encode_bin_targets`. Errors on out-of-range bin indices.
pub fn decode_bin_targets(
    proposal_center: [f64; 3],
    enc: &EncodedTarget,
    cfg: &BinConfig,
) -> Result<OrientedBox3D> {
    cfg.validate()?;
    let n_bins = cfg.num_center_bins();
    if enc.bin_x >= n_bins || enc.bin_y >= n_bins {
        return Err(Error::Validation(format!(
            "center bin ({}, {}) out of range for {n_bins} bins",
            enc.bin_x, enc.bin_y
        )));
    }
    if enc.bin_yaw >= cfg.num_angle_bins {
        return Err(Error::Validation(format!(
            "yaw bin {} out of range for {} bins",
            enc.bin_yaw, cfg.num_angle_bins
        )));
    }
    let axis = |bin: usize, res: f64| (bin as f64 + 0.5 + res) * cfg.bin_size - cfg.search_range;
    let x = proposal_center[0] + axis(enc.bin_x, enc.res_x);
    let y = proposal_center[1] + axis(enc.bin_y, enc.res_y);
    let z = proposal_center[2] + enc.res_z;
    let yaw = normalize_angle((enc.bin_yaw as f64 + 0.5 + enc.res_yaw) * cfg.angle_bin_width());
    let size = [
        cfg.mean_size[0] * enc.res_size[0].exp(),
        cfg.mean_size[1] * enc.res_size[1].exp(),
        cfg.mean_size[2] * enc.res_size[2].exp(),
    ];
    OrientedBox3D::new([x, y, z], size, yaw)
}

/// Sort-then-sum: bitwise deterministic and permutation-invariant.
fn stable_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Predicted bin distributions and residuals for one target.
#[derive(Debug, Clone, PartialEq)]
pub struct RegPrediction {
    pub bin_x: Vec<f64>,
    pub bin_y: Vec<f64>,
    pub bin_yaw: Vec<f64>,
    pub res_x: f64,
    pub res_y: f64,
    pub res_z: f64,
    pub res_yaw: f64,
    pub res_size: [f64; 3],
}

impl RegPrediction {
    /// A prediction that reproduces `target` exactly (zero loss).
    pub fn perfect(target: &EncodedTarget, cfg: &BinConfig) -> Self {
        let one_hot = |n: usize, hit: usize| {
            let mut v = vec![0.0; n];
            v[hit] = 1.0;
            v
        };
        Self {
            bin_x: one_hot(cfg.num_center_bins(), target.bin_x),
            bin_y: one_hot(cfg.num_center_bins(), target.bin_y),
            bin_yaw: one_hot(cfg.num_angle_bins, target.bin_yaw),
            res_x: target.res_x,
            res_y: target.res_y,
            res_z: target.res_z,
            res_yaw: target.res_yaw,
            res_size: target.res_size,
        }
    }

    fn residuals(&self) -> [f64; 7] {
        [
            self.res_x,
            self.res_y,
            self.res_z,
            self.res_yaw,
            self.res_size[0],
            self.res_size[1],
            self.res_size[2],
        ]
    }
}

/// Bin cross-entropy plus residual smooth-L1 for one foreground point.
pub fn point_regression_loss(pred: &RegPrediction, target: &EncodedTarget) -> Result<f64> {
    let bin_terms = [
        cross_entropy(&pred.bin_x, target.bin_x)?,
        cross_entropy(&pred.bin_y, target.bin_y)?,
        cross_entropy(&pred.bin_yaw, target.bin_yaw)?,
    ];
    let mut terms: Vec<f64> = bin_terms.to_vec();
    for (p, t) in pred.residuals().iter().zip(target.residuals().iter()) {
        terms.push(smooth_l1(p - t));
    }
    Ok(stable_sum(terms))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RpnLoss {
    pub focal: f64,
    pub reg: f64,
}

/// Stage-1 loss: mean focal term over all classification probabilities plus
/// the mean bin/residual regression term over foreground points. An empty
/// foreground set contributes zero regression loss.
pub fn rpn_loss(
    class_probs: &[f64],
    foreground: &[(RegPrediction, EncodedTarget)],
    params: &FocalParams,
) -> Result<RpnLoss> {
    if class_probs.is_empty() {
        return Err(Error::Validation(
            "need at least one classification probability".into(),
        ));
    }
    let focal_terms: Result<Vec<f64>> = class_probs
        .iter()
        .map(|&p| focal_loss(p, params))
        .collect();
    let focal = stable_sum(focal_terms?) / class_probs.len() as f64;
    let reg = if foreground.is_empty() {
        0.0
    } else {
        let terms: Result<Vec<f64>> = foreground
            .iter()
            .map(|(pred, tgt)| point_regression_loss(pred, tgt))
            .collect();
        stable_sum(terms?) / foreground.len() as f64
    };
    Ok(RpnLoss { focal, reg })
}

/// Binary cross-entropy of a proposal classification: `label` marks the true
/// class; probabilities of exactly 0 or 1 are accepted only when correct.
pub fn proposal_cls_loss(prob: f64, label: bool) -> Result<f64> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::Domain(format!(
            "probability must lie in [0, 1], got {prob}"
        )));
    }
    let p = if label { prob } else { 1.0 - prob };
    if p == 0.0 {
        return Err(Error::Domain(
            "probability 0 assigned to the true label".into(),
        ));
    }
    Ok(-p.ln())
}

/// Stage-2 loss: mean classification cross-entropy over all proposals plus
/// the mean bin/residual term over positive proposals.
pub fn refine_loss(
    proposals: &[(f64, bool)],
    positives: &[(RegPrediction, EncodedTarget)],
) -> Result<f64> {
    if proposals.is_empty() {
        return Err(Error::Validation("proposal set must be nonempty".into()));
    }
    let cls_terms: Result<Vec<f64>> = proposals
        .iter()
        .map(|&(p, l)| proposal_cls_loss(p, l))
        .collect();
    let cls = stable_sum(cls_terms?) / proposals.len() as f64;
    let reg = if positives.is_empty() {
        0.0
    } else {
        let terms: Result<Vec<f64>> = positives
            .iter()
            .map(|(pred, tgt)| point_regression_loss(pred, tgt))
            .collect();
        stable_sum(terms?) / positives.len() as f64
    };
    Ok(cls + reg)
}
