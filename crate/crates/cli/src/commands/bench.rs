use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use pcd_core::geometry::{bev_iou, iou_3d, OrientedBox3D};
use pcd_core::partition::partition_points;
use pcd_core::sampling::{
    allocate_budget, ball_query, build_branch_pipeline, farthest_point_sampling, FpsStart,
};
use pcd_core::PipelineConfig;

use super::{emit_json, scan_or_synthetic};
use crate::StageArg;

#[derive(Serialize)]
struct TimingStats {
    mean_ms: f64,
    p50_ms: f64,
    p95_ms: f64,
    min_ms: f64,
    max_ms: f64,
}

#[derive(Serialize)]
struct BenchReport {
    stage: String,
    reps: usize,
    points: usize,
    timing: TimingStats,
    /// For the pipeline stage: serial (1 thread) vs configured pool, and
    /// whether both produced bitwise-identical outputs.
    #[serde(skip_serializing_if = "Option::is_none")]
    serial_vs_parallel: Option<SerialParallel>,
}

#[derive(Serialize)]
struct SerialParallel {
    serial_mean_ms: f64,
    parallel_mean_ms: f64,
    outputs_identical: bool,
}

fn summarize(mut samples: Vec<f64>) -> TimingStats {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let pick = |q: f64| samples[((n as f64 - 1.0) * q).round() as usize];
    TimingStats {
        mean_ms: samples.iter().sum::<f64>() / n as f64,
        p50_ms: pick(0.5),
        p95_ms: pick(0.95),
        min_ms: samples[0],
        max_ms: samples[n - 1],
    }
}

/// Time `f` for `reps` repetitions after one excluded warmup run.
fn time_reps(reps: usize, mut f: impl FnMut()) -> Vec<f64> {
    f();
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64() * 1e3
        })
        .collect()
}

pub fn run(
    config: &PipelineConfig,
    stage: StageArg,
    input: Option<&Path>,
    reps: usize,
    seed: u64,
) -> anyhow::Result<()> {
    if reps < 3 {
        anyhow::bail!("--reps must be at least 3");
    }
    let cloud = scan_or_synthetic(input, seed)?;
    let positions: Vec<[f64; 3]> = cloud.positions().collect();
    let spec = config.region_spec(config.inference_overlap)?;
    let partition = partition_points(&cloud, &spec);
    let stats = config.reference_stats();
    let budget = allocate_budget(&stats, &config.strategy, config.total_points)?;
    let schedules = config.schedules(false)?;

    let mut serial_vs_parallel = None;
    let (name, samples) = match stage {
        StageArg::Partition => (
            "partition",
            time_reps(reps, || {
                std::hint::black_box(partition_points(&cloud, &spec));
            }),
        ),
        StageArg::Budget => (
            "budget",
            time_reps(reps, || {
                std::hint::black_box(
                    allocate_budget(&stats, &config.strategy, config.total_points).unwrap(),
                );
            }),
        ),
        StageArg::Fps => (
            "fps",
            time_reps(reps, || {
                std::hint::black_box(
                    farthest_point_sampling(&positions, 2048, FpsStart::NearestCentroid).unwrap(),
                );
            }),
        ),
        StageArg::BallQuery => {
            let centroids =
                farthest_point_sampling(&positions, 1024, FpsStart::NearestCentroid)?
                    .into_iter()
                    .map(|i| positions[i])
                    .collect::<Vec<_>>();
            (
                "ball-query",
                time_reps(reps, || {
                    std::hint::black_box(
                        ball_query(&centroids, &positions, 0.8, 32).unwrap(),
                    );
                }),
            )
        }
        StageArg::Iou => {
            let a = OrientedBox3D::new([10.0, 1.0, -0.5], [3.9, 1.6, 1.56], 0.3)?;
            let b = OrientedBox3D::new([10.8, 1.4, -0.4], [4.2, 1.7, 1.5], 0.9)?;
            (
                "iou",
                time_reps(reps, || {
                    for _ in 0..1000 {
                        std::hint::black_box(bev_iou(&a, &b));
                        std::hint::black_box(iou_3d(&a, &b));
                    }
                }),
            )
        }
        StageArg::Pipeline => {
            let run_pipeline = || {
                build_branch_pipeline(&positions, &partition, &budget, &schedules, seed).unwrap()
            };
            let samples = time_reps(reps, || {
                std::hint::black_box(run_pipeline());
            });
            // serial pool vs the ambient pool, with an output-equality check
            let serial_pool = rayon::ThreadPoolBuilder::new().num_threads(1).build()?;
            let serial_out = serial_pool.install(run_pipeline);
            let parallel_out = run_pipeline();
            let serial_samples =
                serial_pool.install(|| time_reps(reps, || {
                    std::hint::black_box(run_pipeline());
                }));
            serial_vs_parallel = Some(SerialParallel {
                serial_mean_ms: serial_samples.iter().sum::<f64>() / serial_samples.len() as f64,
                parallel_mean_ms: samples.iter().sum::<f64>() / samples.len() as f64,
                outputs_identical: serial_out == parallel_out,
            });
            ("pipeline", samples)
        }
    };

    emit_json(&BenchReport {
        stage: name.to_string(),
        reps,
        points: cloud.len(),
        timing: summarize(samples),
        serial_vs_parallel,
    })
}
