//! Pipeline configuration with every tunable constant in one serializable
//! record. The defaults reproduce the reference setup: boundaries 20/40 m
//! with 5 m training and 3 m inference overlap, 16,384 input points split
//! 9,216/5,120/2,048 by the default strategy against the KITTI train-split
//! density statistics, per-branch radius schedules, quartering group sizes,
//! and proposal ratios 0.3/0.5/0.2.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::error::{Error, Result};
use crate::eval::DifficultyRules;
use crate::partition::{DensityStats, RegionSpec};
use crate::sampling::{BranchSchedule, LayerRadii, ProposalRatios, StrategySpec};
use crate::targets::{BinConfig, FocalParams};

/// Density statistics measured on the KITTI train split (3,712 scans):
/// per-region mean point counts and standard deviations.
pub fn kitti_train_reference_stats() -> DensityStats {
    DensityStats {
        mean: [13_800.0, 3_600.0, 1_000.0],
        sigma: [1_800.0, 1_100.0, 500.0],
        n_scenes: 3_712,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Near/mid boundary and mid/far boundary, meters.
    pub boundaries: (f64, f64),
    pub max_range: f64,
    pub train_overlap: f64,
    pub inference_overlap: f64,
    /// Total points sampled per scene before the region split.
    pub total_points: usize,
    /// Fallback density statistics when no measured stats are supplied.
    pub density_mean: [f64; 3],
    pub density_sigma: [f64; 3],
    pub strategy: StrategySpec,
    /// Per-branch centroid counts for the four set-abstraction layers.
    pub group_sizes: [[usize; 4]; 3],
    pub samples_per_group: usize,
    /// Single-scale grouping radii per branch and layer, meters.
    pub single_scale_radii: [[f64; 4]; 3],
    /// Multi-scale grouping radius pairs per branch and layer, meters.
    pub multi_scale_radii: [[(f64, f64); 4]; 3],
    pub proposal_ratios: ProposalRatios,
    pub bin: BinConfig,
    pub focal: FocalParams,
    pub augment: AugmentConfig,
    pub difficulty: DifficultyRules,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            boundaries: (20.0, 40.0),
            max_range: 70.0,
            train_overlap: 5.0,
            inference_overlap: 3.0,
            total_points: 16_384,
            density_mean: [13_800.0, 3_600.0, 1_000.0],
            density_sigma: [1_800.0, 1_100.0, 500.0],
            strategy: StrategySpec::default(),
            group_sizes: [
                [2_304, 576, 144, 36],
                [1_280, 320, 80, 20],
                [512, 128, 32, 8],
            ],
            samples_per_group: 32,
            single_scale_radii: [
                [0.4, 0.8, 1.6, 3.2],
                [0.8, 1.6, 3.2, 4.0],
                [1.0, 2.0, 3.0, 4.0],
            ],
            // layer-1 pairs per branch, later layers extended by the base
            // schedule's per-component ratios (sorted within each pair)
            multi_scale_radii: [
                [(0.1, 0.5), (0.5, 1.0), (1.0, 2.0), (2.0, 4.0)],
                [(0.2, 0.6), (1.0, 1.2), (2.0, 2.4), (4.0, 4.8)],
                [(0.4, 0.8), (1.6, 2.0), (3.2, 4.0), (6.4, 8.0)],
            ],
            proposal_ratios: ProposalRatios::default(),
            bin: BinConfig::default(),
            focal: FocalParams::default(),
            augment: AugmentConfig::default(),
            difficulty: DifficultyRules::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.region_spec(self.train_overlap)?;
        self.region_spec(self.inference_overlap)?;
        self.bin.validate()?;
        self.augment.validate()?;
        self.difficulty.validate()?;
        self.schedules(false)?;
        self.schedules(true)?;
        Ok(())
    }

    pub fn region_spec(&self, overlap: f64) -> Result<RegionSpec> {
        RegionSpec::new(
            self.boundaries.0,
            self.boundaries.1,
            self.max_range,
            overlap,
        )
    }

    pub fn reference_stats(&self) -> DensityStats {
        DensityStats {
            mean: self.density_mean,
            sigma: self.density_sigma,
            n_scenes: 0,
        }
    }

    /// Branch schedules for the three regions; `multi_scale` selects the
    /// paired-radius grouping, otherwise the single-scale schedule.
    pub fn schedules(&self, multi_scale: bool) -> Result<[BranchSchedule; 3]> {
        let mut out = Vec::with_capacity(3);
        for b in 0..3 {
            let radii: Vec<LayerRadii> = if multi_scale {
                self.multi_scale_radii[b]
                    .iter()
                    .map(|&(a, c)| LayerRadii::Pair(a, c))
                    .collect()
            } else {
                self.single_scale_radii[b]
                    .iter()
                    .map(|&r| LayerRadii::Single(r))
                    .collect()
            };
            out.push(BranchSchedule::new(
                radii,
                self.group_sizes[b].to_vec(),
                self.samples_per_group,
            )?);
        }
        Ok(out.try_into().expect("three branches"))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::malformed(path, format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Validation(format!("config serialization failed: {e}")))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}
