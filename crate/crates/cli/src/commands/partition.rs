use std::path::Path;

use serde::Serialize;

use pcd_core::partition::partition_points;
use pcd_core::{PipelineConfig, RegionSpec};

use super::{emit_json, region_spec};
use crate::RegionArgs;

#[derive(Serialize)]
struct PartitionReport {
    frame_id: String,
    total_points: usize,
    spec: RegionSpec,
    counts: Counts,
    #[serde(skip_serializing_if = "Option::is_none")]
    indices: Option<Indices>,
}

#[derive(Serialize)]
struct Counts {
    near: usize,
    mid: usize,
    far: usize,
}

#[derive(Serialize)]
struct Indices {
    near: Vec<usize>,
    mid: Vec<usize>,
    far: Vec<usize>,
}

pub fn run(
    config: &PipelineConfig,
    input: &Path,
    region: &RegionArgs,
    emit_indices: bool,
) -> anyhow::Result<()> {
    let cloud = pcd_core::kitti::read_velodyne(input)?;
    let spec = region_spec(config, region)?;
    let p = partition_points(&cloud, &spec);
    let [near, mid, far] = p.counts();
    emit_json(&PartitionReport {
        frame_id: cloud.frame_id.clone(),
        total_points: cloud.len(),
        spec,
        counts: Counts { near, mid, far },
        indices: emit_indices.then_some(Indices {
            near: p.near,
            mid: p.mid,
            far: p.far,
        }),
    })
}
