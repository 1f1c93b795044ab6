//! Shared fixtures for the kernel benchmarks.

use pcd_core::synth::{generate_scene, SyntheticSceneSpec};
use pcd_core::PointCloud;

/// A deterministic synthetic scene at roughly scan scale.
pub fn bench_scene(seed: u64) -> PointCloud {
    let (cloud, _) = generate_scene(&SyntheticSceneSpec::default(), seed).expect("synthetic scene");
    cloud
}
