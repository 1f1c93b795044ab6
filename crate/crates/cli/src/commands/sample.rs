use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;

use pcd_core::partition::{partition_points, DensityStats, Region};
use pcd_core::sampling::{allocate_budget, build_branch_pipeline, StrategySpec};
use pcd_core::{PipelineConfig, SamplingBudget};

use super::{emit_json, scan_or_synthetic};
use crate::StrategyArg;

#[derive(Serialize)]
struct BranchReport {
    region: Region,
    valid: bool,
    budget: usize,
    /// (centroids, samples per group) per layer and grouping scale.
    layer_shapes: Vec<Vec<(usize, usize)>>,
}

#[derive(Serialize)]
struct SampleReport {
    frame_id: String,
    strategy: StrategySpec,
    budget: SamplingBudget,
    region_counts: [usize; 3],
    multi_scale: bool,
    branches: Vec<BranchReport>,
    timing_ms: Timing,
}

#[derive(Serialize)]
struct Timing {
    partition: f64,
    budget: f64,
    pipeline: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    config: &PipelineConfig,
    input: Option<&Path>,
    strategy: StrategyArg,
    total: Option<usize>,
    overlap: Option<f64>,
    seed: u64,
    msg: bool,
    stats_path: Option<&Path>,
) -> anyhow::Result<()> {
    let strategy = match strategy {
        StrategyArg::Natural => StrategySpec::natural(),
        StrategyArg::One => StrategySpec::numbered(1)?,
        StrategyArg::Two => StrategySpec::numbered(2)?,
        StrategyArg::Three => StrategySpec::numbered(3)?,
        StrategyArg::Four => StrategySpec::numbered(4)?,
    };
    let total = total.unwrap_or(config.total_points);
    let stats: DensityStats = match stats_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading stats file {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing stats file {}", path.display()))?
        }
        None => config.reference_stats(),
    };

    let cloud = scan_or_synthetic(input, seed)?;
    let positions: Vec<[f64; 3]> = cloud.positions().collect();
    let spec = config
        .region_spec(overlap.unwrap_or(config.inference_overlap))?;

    let t0 = Instant::now();
    let partition = partition_points(&cloud, &spec);
    let t_partition = t0.elapsed();

    let t0 = Instant::now();
    let budget = allocate_budget(&stats, &strategy, total)?;
    let t_budget = t0.elapsed();

    // group sizes follow the configured table only for the configured total;
    // otherwise quarter the branch budget per layer
    let mut cfg = config.clone();
    if total != config.total_points
        || (budget.near, budget.mid, budget.far)
            != (
                cfg.group_sizes[0][0] * 4,
                cfg.group_sizes[1][0] * 4,
                cfg.group_sizes[2][0] * 4,
            )
    {
        for (b, region_budget) in [budget.near, budget.mid, budget.far].iter().enumerate() {
            let mut size = (region_budget / 4).max(1);
            for l in 0..4 {
                cfg.group_sizes[b][l] = size.max(4 - l); // keep strictly decreasing
                size = (size / 4).max(1);
            }
        }
    }
    let schedules = cfg.schedules(msg)?;

    let t0 = Instant::now();
    let pipeline = build_branch_pipeline(&positions, &partition, &budget, &schedules, seed)?;
    let t_pipeline = t0.elapsed();

    let branches = pipeline
        .branches
        .iter()
        .map(|b| BranchReport {
            region: b.region,
            valid: b.valid,
            budget: budget.for_region(b.region),
            layer_shapes: b.layers.iter().map(|l| l.shapes()).collect(),
        })
        .collect();

    emit_json(&SampleReport {
        frame_id: cloud.frame_id.clone(),
        strategy,
        budget,
        region_counts: partition.counts(),
        multi_scale: msg,
        branches,
        timing_ms: Timing {
            partition: t_partition.as_secs_f64() * 1e3,
            budget: t_budget.as_secs_f64() * 1e3,
            pipeline: t_pipeline.as_secs_f64() * 1e3,
        },
    })
}
