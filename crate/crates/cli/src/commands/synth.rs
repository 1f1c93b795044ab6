use std::path::Path;

use serde::Serialize;

use pcd_core::synth::{generate_scene, nominal_calibration, SyntheticSceneSpec};

use super::emit_json;

#[derive(Serialize)]
struct SynthReport {
    frame_id: String,
    points: usize,
    cars: usize,
    output: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    calib: Option<String>,
}

pub fn run(
    output: &Path,
    labels: Option<&Path>,
    calib: Option<&Path>,
    cars: Option<[usize; 3]>,
    seed: u64,
) -> anyhow::Result<()> {
    let mut spec = SyntheticSceneSpec::default();
    if let Some(n) = cars {
        spec.n_cars = n;
    }
    let (cloud, gts) = generate_scene(&spec, seed)?;
    pcd_core::kitti::write_velodyne(output, &cloud)?;

    let calibration = nominal_calibration();
    if let Some(path) = labels {
        pcd_core::kitti::write_labels(path, &gts, &calibration)?;
    }
    if let Some(path) = calib {
        pcd_core::kitti::write_calibration(path, &calibration)?;
    }

    emit_json(&SynthReport {
        frame_id: cloud.frame_id.clone(),
        points: cloud.len(),
        cars: gts.len(),
        output: output.display().to_string(),
        labels: labels.map(|p| p.display().to_string()),
        calib: calib.map(|p| p.display().to_string()),
    })
}
