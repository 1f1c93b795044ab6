//! Density-aware LiDAR point-cloud kernels.
//!
//! The library covers the data path of a three-branch point-based 3D
//! detector as framework-free, verifiable computation:
//!
//! - [`kitti`]: velodyne scan / label / calibration ingestion with
//!   camera-to-LiDAR conversion.
//! - [`geometry`]: oriented-box math, polygon clipping, BEV and 3D IoU.
//! - [`partition`]: near/mid/far range partitioning with overlap and
//!   per-region density statistics.
//! - [`sampling`]: uncertainty-based budget allocation, per-region sampling,
//!   farthest-point sampling, ball-query grouping, and the three-branch
//!   layered pipeline.
//! - [`targets`]: bin-based box target encoding/decoding and the detector
//!   loss formulas with hand-derived gradients.
//! - [`augment`]: flip/scale/rotation augmentation and cross-scene
//!   ground-truth insertion.
//! - [`eval`]: NMS, difficulty bucketing, and Average Precision.
//! - [`synth`]: deterministic synthetic scenes for verification without a
//!   dataset.
//!
//! Everything is deterministic given a seed, and parallel sections reduce in
//! an order-independent way, so results are identical for any thread count.

pub mod augment;
pub mod config;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod kitti;
pub mod partition;
pub mod sampling;
pub mod synth;
pub mod targets;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use eval::{ApMode, Detection, Difficulty, IouKind};
pub use geometry::OrientedBox3D;
pub use kitti::{Calibration, GroundTruth, Point, PointCloud};
pub use partition::{DensityStats, Region, RegionPartition, RegionSpec};
pub use sampling::{BranchSchedule, PipelineOutput, SamplingBudget, StrategySpec};
