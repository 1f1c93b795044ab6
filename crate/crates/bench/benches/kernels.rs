use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use pcd_bench::bench_scene;
use pcd_core::geometry::{bev_iou, iou_3d, OrientedBox3D};
use pcd_core::partition::partition_points;
use pcd_core::sampling::{
    allocate_budget, ball_query, build_branch_pipeline, farthest_point_sampling, FpsStart,
};
use pcd_core::{PipelineConfig, RegionSpec};

fn bench_partition(c: &mut Criterion) {
    let cloud = bench_scene(1);
    let spec = RegionSpec::inference();
    c.bench_function("partition_scan", |b| {
        b.iter(|| black_box(partition_points(black_box(&cloud), &spec)))
    });
}

fn bench_iou(c: &mut Criterion) {
    let a = OrientedBox3D::new([10.0, 1.0, -0.5], [3.9, 1.6, 1.56], 0.3).unwrap();
    let bb = OrientedBox3D::new([10.8, 1.4, -0.4], [4.2, 1.7, 1.5], 0.9).unwrap();
    c.bench_function("bev_iou_pair", |b| {
        b.iter(|| black_box(bev_iou(black_box(&a), black_box(&bb))))
    });
    c.bench_function("iou_3d_pair", |b| {
        b.iter(|| black_box(iou_3d(black_box(&a), black_box(&bb))))
    });
}

fn bench_fps(c: &mut Criterion) {
    let cloud = bench_scene(2);
    let positions: Vec<[f64; 3]> = cloud.positions().collect();
    c.bench_function("fps_2048_of_scan", |b| {
        b.iter(|| {
            black_box(
                farthest_point_sampling(black_box(&positions), 2048, FpsStart::NearestCentroid)
                    .unwrap(),
            )
        })
    });
}

fn bench_ball_query(c: &mut Criterion) {
    let cloud = bench_scene(3);
    let positions: Vec<[f64; 3]> = cloud.positions().collect();
    let centroids: Vec<[f64; 3]> =
        farthest_point_sampling(&positions, 1024, FpsStart::NearestCentroid)
            .unwrap()
            .into_iter()
            .map(|i| positions[i])
            .collect();
    c.bench_function("ball_query_1024x32", |b| {
        b.iter(|| black_box(ball_query(black_box(&centroids), &positions, 0.8, 32).unwrap()))
    });
}

fn bench_pipeline(c: &mut Criterion) {
    let cfg = PipelineConfig::default();
    let cloud = bench_scene(4);
    let positions: Vec<[f64; 3]> = cloud.positions().collect();
    let spec = cfg.region_spec(cfg.inference_overlap).unwrap();
    let partition = partition_points(&cloud, &spec);
    let budget = allocate_budget(&cfg.reference_stats(), &cfg.strategy, cfg.total_points).unwrap();
    let schedules = cfg.schedules(false).unwrap();
    c.bench_function("three_branch_pipeline_16k", |b| {
        b.iter(|| {
            black_box(
                build_branch_pipeline(&positions, &partition, &budget, &schedules, 9).unwrap(),
            )
        })
    });
}

criterion_group!(
    benches,
    bench_partition,
    bench_iou,
    bench_fps,
    bench_ball_query,
    bench_pipeline
);
criterion_main!(benches);
