pub mod augment;
pub mod bench;
pub mod eval;
pub mod partition;
pub mod sample;
pub mod stats;
pub mod synth;

use std::path::Path;

use pcd_core::partition::RangeMetric;
use pcd_core::{PipelineConfig, PointCloud, RegionSpec};

use crate::RegionArgs;

/// Region spec from CLI overrides on top of the config; the default overlap
/// is the inference-phase value.
pub fn region_spec(config: &PipelineConfig, args: &RegionArgs) -> anyhow::Result<RegionSpec> {
    let (b1, b2) = match &args.boundaries {
        Some(v) => (v[0], v[1]),
        None => config.boundaries,
    };
    let max_range = args.max_range.unwrap_or(config.max_range);
    let overlap = args.overlap.unwrap_or(config.inference_overlap);
    let metric: RangeMetric = args.metric.into();
    Ok(RegionSpec::new(b1, b2, max_range, overlap)?.with_metric(metric))
}

/// Load a scan, or deterministically synthesize one when no path is given.
pub fn scan_or_synthetic(input: Option<&Path>, seed: u64) -> anyhow::Result<PointCloud> {
    match input {
        Some(path) => Ok(pcd_core::kitti::read_velodyne(path)?),
        None => {
            eprintln!("pcd: no --input given, generating a synthetic scene (seed {seed})");
            let (cloud, _) =
                pcd_core::synth::generate_scene(&pcd_core::synth::SyntheticSceneSpec::default(), seed)?;
            Ok(cloud)
        }
    }
}

pub fn emit_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}
