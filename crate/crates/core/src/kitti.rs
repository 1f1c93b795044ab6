//! KITTI file ingestion: velodyne scans, object labels, and calibration,
//! plus camera-to-LiDAR conversion of labeled boxes.
//!
//! Conventions fixed here and used everywhere else:
//! - LiDAR frame: x forward, y left, z up. Box yaw is counterclockwise
//!   about +z from +x, stored in (-pi, pi]. Camera rotation `ry` converts
//!   as `yaw = -ry - pi/2`.
//! - Boxes store the 3D centroid, not the KITTI bottom-face center; the
//!   conversion happens in this module only.
//! - Parsing is total: every input either parses or yields a structured
//!   error. DontCare rows are retained with a flag so ingestion is lossless.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, OrientedBox3D};

/// Tolerance for the rotation-block orthonormality check on calibration.
const ROTATION_TOL: f64 = 1e-3;

/// One LiDAR return: position in meters, reflectance in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub r: f32,
}

impl Point {
    pub fn xyz(&self) -> [f64; 3] {
        [self.x as f64, self.y as f64, self.z as f64]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub frame_id: String,
}

impl PointCloud {
    pub fn new(points: Vec<Point>, frame_id: impl Into<String>) -> Self {
        Self {
            points,
            frame_id: frame_id.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Positions as f64 triples, in storage order.
    pub fn positions(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.points.iter().map(Point::xyz)
    }
}

/// Read a raw velodyne scan: little-endian f32 quadruples (x, y, z, r).
pub fn read_velodyne(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 16 != 0 {
        return Err(Error::malformed(
            path,
            format!("size {} is not a multiple of 16 bytes", bytes.len()),
        ));
    }
    let mut points = Vec::with_capacity(bytes.len() / 16);
    for (i, chunk) in bytes.chunks_exact(16).enumerate() {
        let mut vals = [0f32; 4];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = f32::from_le_bytes(chunk[4 * k..4 * k + 4].try_into().unwrap());
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(
                path,
                format!("point {i}"),
                "non-finite float value",
            ));
        }
        if !(0.0..=1.0).contains(&vals[3]) {
            return Err(Error::parse(
                path,
                format!("point {i}"),
                format!("reflectance {} outside [0, 1]", vals[3]),
            ));
        }
        points.push(Point {
            x: vals[0],
            y: vals[1],
            z: vals[2],
            r: vals[3],
        });
    }
    let frame_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(PointCloud { points, frame_id })
}

/// Write a scan in the same binary layout `read_velodyne` expects.
pub fn write_velodyne(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(cloud.len() * 16);
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.r] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// small fixed-size matrix helpers (row-major)
// ---------------------------------------------------------------------------

type Mat3 = [[f64; 3]; 3];

pub(crate) const MAT3_IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn mat3_mul_vec(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn mat3_det(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

#[allow(clippy::needless_range_loop)] // index arithmetic over cofactors
fn mat3_inverse(m: &Mat3) -> Result<Mat3> {
    let det = mat3_det(m);
    if det.abs() < 1e-12 {
        return Err(Error::Validation("singular 3x3 matrix".into()));
    }
    let inv_det = 1.0 / det;
    let mut out = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            // cofactor expansion, transposed
            let r1 = (r + 1) % 3;
            let r2 = (r + 2) % 3;
            let c1 = (c + 1) % 3;
            let c2 = (c + 2) % 3;
            out[c][r] = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) * inv_det;
        }
    }
    Ok(out)
}

fn mat3_is_orthonormal(m: &Mat3, tol: f64) -> bool {
    // m * m^T should be the identity
    for r in 0..3 {
        for c in 0..3 {
            let dot: f64 = (0..3).map(|k| m[r][k] * m[c][k]).sum();
            let want = if r == c { 1.0 } else { 0.0 };
            if (dot - want).abs() > tol {
                return false;
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// calibration
// ---------------------------------------------------------------------------

/// KITTI camera calibration: image projection `P2`, rectification `R0_rect`,
/// and the rigid LiDAR-to-camera transform `Tr_velo_to_cam`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub p2: [[f64; 4]; 3],
    pub r0_rect: Mat3,
    pub tr_velo_to_cam: [[f64; 4]; 3],
}

impl Calibration {
    pub fn new(p2: [[f64; 4]; 3], r0_rect: Mat3, tr_velo_to_cam: [[f64; 4]; 3]) -> Result<Self> {
        if !mat3_is_orthonormal(&r0_rect, ROTATION_TOL) {
            return Err(Error::Validation(
                "R0_rect is not orthonormal within 1e-3".into(),
            ));
        }
        let (rot, _) = split_rigid(&tr_velo_to_cam);
        if !mat3_is_orthonormal(&rot, ROTATION_TOL) {
            return Err(Error::Validation(
                "Tr_velo_to_cam rotation block is not orthonormal within 1e-3".into(),
            ));
        }
        Ok(Self {
            p2,
            r0_rect,
            tr_velo_to_cam,
        })
    }

    /// Identity rectification and extrinsics (camera frame == LiDAR frame).
    pub fn identity() -> Self {
        Self {
            p2: [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
            ],
            r0_rect: MAT3_IDENTITY,
            tr_velo_to_cam: [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
            ],
        }
    }

    /// Rectified-camera coordinates of a LiDAR-frame point.
    pub fn lidar_to_camera(&self, p: [f64; 3]) -> [f64; 3] {
        let (rot, t) = split_rigid(&self.tr_velo_to_cam);
        let q = mat3_mul_vec(&rot, p);
        mat3_mul_vec(&self.r0_rect, [q[0] + t[0], q[1] + t[1], q[2] + t[2]])
    }

    /// LiDAR coordinates of a rectified-camera point (inverse of the above).
    pub fn camera_to_lidar(&self, p: [f64; 3]) -> [f64; 3] {
        // Rotation blocks are only orthonormal within 1e-3 in real files, so
        // invert properly instead of transposing.
        let (rot, t) = split_rigid(&self.tr_velo_to_cam);
        let r0_inv = mat3_inverse(&self.r0_rect).expect("validated rectification");
        let rot_inv = mat3_inverse(&rot).expect("validated rigid transform");
        let q = mat3_mul_vec(&r0_inv, p);
        mat3_mul_vec(&rot_inv, [q[0] - t[0], q[1] - t[1], q[2] - t[2]])
    }

    /// Pixel coordinates of a rectified-camera point; `None` behind the image plane.
    pub fn project_to_image(&self, p_cam: [f64; 3]) -> Option<[f64; 2]> {
        let h = [p_cam[0], p_cam[1], p_cam[2], 1.0];
        let mut uvw = [0.0; 3];
        for (r, row) in self.p2.iter().enumerate() {
            uvw[r] = row.iter().zip(h.iter()).map(|(a, b)| a * b).sum();
        }
        if uvw[2] <= 1e-9 {
            return None;
        }
        Some([uvw[0] / uvw[2], uvw[1] / uvw[2]])
    }

    /// Convert a KITTI camera-frame box (bottom-center location, dimensions
    /// h/w/l, rotation `ry` about camera y) to a LiDAR-frame box.
    pub fn camera_box_to_lidar(
        &self,
        location: [f64; 3],
        hwl: [f64; 3],
        ry: f64,
    ) -> Result<OrientedBox3D> {
        let [h, w, l] = hwl;
        // lift bottom-center to the 3D centroid before transforming
        let centroid_cam = [location[0], location[1] - h / 2.0, location[2]];
        let center = self.camera_to_lidar(centroid_cam);
        OrientedBox3D::new(center, [l, w, h], normalize_angle(-ry - std::f64::consts::FRAC_PI_2))
    }

    /// Inverse of `camera_box_to_lidar`: (bottom-center location, h/w/l, ry).
    pub fn lidar_box_to_camera(&self, bbox: &OrientedBox3D) -> ([f64; 3], [f64; 3], f64) {
        let [l, w, h] = bbox.size;
        let centroid_cam = self.lidar_to_camera(bbox.center);
        let location = [centroid_cam[0], centroid_cam[1] + h / 2.0, centroid_cam[2]];
        let ry = normalize_angle(-bbox.yaw - std::f64::consts::FRAC_PI_2);
        (location, [h, w, l], ry)
    }
}

fn split_rigid(m: &[[f64; 4]; 3]) -> (Mat3, [f64; 3]) {
    let rot = [
        [m[0][0], m[0][1], m[0][2]],
        [m[1][0], m[1][1], m[1][2]],
        [m[2][0], m[2][1], m[2][2]],
    ];
    (rot, [m[0][3], m[1][3], m[2][3]])
}

/// Parse a KITTI calibration file (`KEY: v0 v1 ...` lines).
pub fn read_calibration(path: impl AsRef<Path>) -> Result<Calibration> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut fields: HashMap<&str, Vec<f64>> = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, rest)) = line.split_once(':') else {
            continue;
        };
        let mut vals = Vec::new();
        for tok in rest.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| {
                Error::parse(
                    path,
                    format!("line {}", lineno + 1),
                    format!("bad float {tok:?}"),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::parse(
                    path,
                    format!("line {}", lineno + 1),
                    "non-finite calibration value",
                ));
            }
            vals.push(v);
        }
        fields.insert(key.trim(), vals);
    }

    let take = |key: &str, want: usize| -> Result<Vec<f64>> {
        let vals = fields.get(key).ok_or_else(|| Error::MissingField {
            path: path.to_path_buf(),
            field: key.to_string(),
        })?;
        if vals.len() != want {
            return Err(Error::parse(
                path,
                key.to_string(),
                format!("expected {want} values, got {}", vals.len()),
            ));
        }
        Ok(vals.clone())
    };

    let p2v = take("P2", 12)?;
    let r0v = take("R0_rect", 9)?;
    let trv = take("Tr_velo_to_cam", 12)?;

    let row4 = |v: &[f64], r: usize| [v[4 * r], v[4 * r + 1], v[4 * r + 2], v[4 * r + 3]];
    let row3 = |v: &[f64], r: usize| [v[3 * r], v[3 * r + 1], v[3 * r + 2]];
    Calibration::new(
        [row4(&p2v, 0), row4(&p2v, 1), row4(&p2v, 2)],
        [row3(&r0v, 0), row3(&r0v, 1), row3(&r0v, 2)],
        [row4(&trv, 0), row4(&trv, 1), row4(&trv, 2)],
    )
}

/// Serialize a calibration in the KITTI key-matrix layout.
pub fn write_calibration(path: impl AsRef<Path>, calib: &Calibration) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let fmt_row = |vals: &[f64]| {
        vals.iter()
            .map(|v| format!("{v:.12e}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let flat4 = |m: &[[f64; 4]; 3]| m.iter().flatten().copied().collect::<Vec<_>>();
    let flat3 = |m: &Mat3| m.iter().flatten().copied().collect::<Vec<_>>();
    let _ = writeln!(out, "P2: {}", fmt_row(&flat4(&calib.p2)));
    let _ = writeln!(out, "R0_rect: {}", fmt_row(&flat3(&calib.r0_rect)));
    let _ = writeln!(
        out,
        "Tr_velo_to_cam: {}",
        fmt_row(&flat4(&calib.tr_velo_to_cam))
    );
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// labels
// ---------------------------------------------------------------------------

/// One KITTI object label, with the 3D box already in the LiDAR frame.
/// DontCare rows keep their 2D fields but have no 3D box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub class_label: String,
    pub truncation: f64,
    pub occlusion: i32,
    pub alpha: f64,
    /// (left, top, right, bottom) in pixels.
    pub bbox2d: [f64; 4],
    pub box3d: Option<OrientedBox3D>,
    pub dont_care: bool,
}

impl GroundTruth {
    pub fn bbox_height(&self) -> f64 {
        self.bbox2d[3] - self.bbox2d[1]
    }
}

/// Parse a 15-column KITTI label file, converting boxes to the LiDAR frame.
pub fn read_labels(path: impl AsRef<Path>, calib: &Calibration) -> Result<Vec<GroundTruth>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text, calib, path)
}

pub(crate) fn parse_labels(
    text: &str,
    calib: &Calibration,
    path: &Path,
) -> Result<Vec<GroundTruth>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let loc = || format!("line {}", lineno + 1);
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 15 {
            return Err(Error::parse(
                path,
                loc(),
                format!("expected 15 columns, got {}", cols.len()),
            ));
        }
        let mut nums = [0f64; 14];
        for (k, tok) in cols[1..].iter().enumerate() {
            nums[k] = tok
                .parse()
                .map_err(|_| Error::parse(path, loc(), format!("bad float {tok:?}")))?;
            if !nums[k].is_finite() {
                return Err(Error::parse(path, loc(), "non-finite label value"));
            }
        }
        let class_label = cols[0].to_string();
        let dont_care = class_label == "DontCare";
        let truncation = nums[0];
        let occlusion = nums[1] as i32;
        let alpha = nums[2];
        let bbox2d = [nums[3], nums[4], nums[5], nums[6]];
        if bbox2d[2] <= bbox2d[0] || bbox2d[3] <= bbox2d[1] {
            return Err(Error::parse(
                path,
                loc(),
                format!("degenerate 2D box {bbox2d:?}"),
            ));
        }
        let box3d = if dont_care {
            None
        } else {
            if !(0.0..=1.0).contains(&truncation) {
                return Err(Error::parse(
                    path,
                    loc(),
                    format!("truncation {truncation} outside [0, 1]"),
                ));
            }
            if nums[1].fract() != 0.0 || !(0..=3).contains(&occlusion) {
                return Err(Error::parse(
                    path,
                    loc(),
                    format!("occlusion {} outside {{0, 1, 2, 3}}", nums[1]),
                ));
            }
            let hwl = [nums[7], nums[8], nums[9]];
            let location = [nums[10], nums[11], nums[12]];
            let ry = nums[13];
            Some(
                calib
                    .camera_box_to_lidar(location, hwl, ry)
                    .map_err(|e| Error::parse(path, loc(), e.to_string()))?,
            )
        };
        out.push(GroundTruth {
            class_label,
            truncation,
            occlusion,
            alpha,
            bbox2d,
            box3d,
            dont_care,
        });
    }
    Ok(out)
}

/// Write labels in the 15-column KITTI layout, converting LiDAR boxes back to
/// the camera frame. DontCare rows get the standard sentinel values.
pub fn write_labels(
    path: impl AsRef<Path>,
    labels: &[GroundTruth],
    calib: &Calibration,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for gt in labels {
        let row = match &gt.box3d {
            Some(bbox) => {
                let (loc, hwl, ry) = calib.lidar_box_to_camera(bbox);
                format!(
                    "{} {:.2} {} {:.6} {:.2} {:.2} {:.2} {:.2} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
                    gt.class_label,
                    gt.truncation,
                    gt.occlusion,
                    gt.alpha,
                    gt.bbox2d[0],
                    gt.bbox2d[1],
                    gt.bbox2d[2],
                    gt.bbox2d[3],
                    hwl[0],
                    hwl[1],
                    hwl[2],
                    loc[0],
                    loc[1],
                    loc[2],
                    ry
                )
            }
            None => format!(
                "{} -1 -1 -10 {:.2} {:.2} {:.2} {:.2} -1 -1 -1 -1000 -1000 -1000 -10",
                gt.class_label, gt.bbox2d[0], gt.bbox2d[1], gt.bbox2d[2], gt.bbox2d[3]
            ),
        };
        out.push_str(&row);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    /// Nominal KITTI-style extrinsics: x_cam = -y_velo, y_cam = -z_velo,
    /// z_cam = x_velo, with a small translation.
    fn nominal_calib() -> Calibration {
        Calibration::new(
            [
                [720.0, 0.0, 620.0, 0.0],
                [0.0, 720.0, 180.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
            ],
            MAT3_IDENTITY,
            [
                [0.0, -1.0, 0.0, 0.0],
                [0.0, 0.0, -1.0, -0.08],
                [1.0, 0.0, 0.0, -0.27],
            ],
        )
        .unwrap()
    }

    #[test]
    fn velodyne_round_trip_two_points() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("000000.bin");
        let cloud = PointCloud::new(
            vec![
                Point {
                    x: 1.0,
                    y: 2.0,
                    z: 3.0,
                    r: 0.5,
                },
                Point {
                    x: 4.0,
                    y: 5.0,
                    z: 6.0,
                    r: 0.1,
                },
            ],
            "000000",
        );
        write_velodyne(&path, &cloud).unwrap();
        let back = read_velodyne(&path).unwrap();
        assert_eq!(back.points, cloud.points);
        assert_eq!(back.frame_id, "000000");
    }

    #[test]
    fn velodyne_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.bin");
        std::fs::write(&path, []).unwrap();
        let cloud = read_velodyne(&path).unwrap();
        assert_eq!(cloud.len(), 0);
    }

    #[test]
    fn velodyne_bad_size_and_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, [0u8; 17]).unwrap();
        assert!(matches!(
            read_velodyne(&path),
            Err(Error::MalformedFile { .. })
        ));

        let mut bytes = Vec::new();
        for v in [1.0f32, 2.0, f32::NAN, 0.5] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&path, &bytes).unwrap();
        match read_velodyne(&path) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "point 0"),
            other => panic!("expected parse error, got {other:?}"),
        }

        let mut bytes = Vec::new();
        for v in [1.0f32, 2.0, 3.0, 1.5] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_velodyne(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn velodyne_round_trip_random_scan_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let points: Vec<Point> = (0..16_384)
            .map(|_| Point {
                x: rng.random_range(-80.0..80.0),
                y: rng.random_range(-80.0..80.0),
                z: rng.random_range(-3.0..2.0),
                r: rng.random_range(0.0..1.0),
            })
            .collect();
        let cloud = PointCloud::new(points, "rand");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rand.bin");
        write_velodyne(&path, &cloud).unwrap();
        let bytes_a = std::fs::read(&path).unwrap();
        let back = read_velodyne(&path).unwrap();
        let path_b = dir.path().join("rand2.bin");
        write_velodyne(&path_b, &back).unwrap();
        let bytes_b = std::fs::read(&path_b).unwrap();
        assert_eq!(bytes_a, bytes_b);
    }

    #[test]
    fn calibration_missing_field_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calib.txt");
        std::fs::write(&path, "P2: 1 0 0 0 0 1 0 0 0 0 1 0\n").unwrap();
        match read_calibration(&path) {
            Err(Error::MissingField { field, .. }) => assert_eq!(field, "R0_rect"),
            other => panic!("expected missing field, got {other:?}"),
        }
    }

    #[test]
    fn calibration_identity_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calib.txt");
        std::fs::write(
            &path,
            "P2: 1 0 0 0 0 1 0 0 0 0 1 0\nR0_rect: 1 0 0 0 1 0 0 0 1\nTr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n",
        )
        .unwrap();
        let calib = read_calibration(&path).unwrap();
        assert_eq!(calib.camera_to_lidar([0.0; 3]), [0.0; 3]);
        let p = calib.camera_to_lidar([1.0, 2.0, 3.0]);
        for (a, b) in p.iter().zip([1.0, 2.0, 3.0].iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn calibration_rejects_non_orthonormal_rotation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calib.txt");
        std::fs::write(
            &path,
            "P2: 1 0 0 0 0 1 0 0 0 0 1 0\nR0_rect: 1 0 0 0 2 0 0 0 1\nTr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n",
        )
        .unwrap();
        assert!(matches!(
            read_calibration(&path),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn calibration_rotation_about_z_oracle() {
        // Tr = R_z(-10 deg) so camera->lidar equals R_z(+10 deg)
        let th = -10f64.to_radians();
        let (s, c) = th.sin_cos();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calib.txt");
        std::fs::write(
            &path,
            format!(
                "P2: 1 0 0 0 0 1 0 0 0 0 1 0\nR0_rect: 1 0 0 0 1 0 0 0 1\nTr_velo_to_cam: {c} {mns} 0 0 {s} {c} 0 0 0 0 1 0\n",
                mns = -s
            ),
        )
        .unwrap();
        let calib = read_calibration(&path).unwrap();
        let p = calib.camera_to_lidar([1.0, 0.0, 0.0]);
        let want = [10f64.to_radians().cos(), 10f64.to_radians().sin(), 0.0];
        for (a, b) in p.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-6, "{p:?} vs {want:?}");
        }
    }

    /// Camera-frame corners straight from the KITTI definition: bottom-center
    /// location, y down, rotated by ry about camera y.
    fn camera_corners(location: [f64; 3], hwl: [f64; 3], ry: f64) -> [[f64; 3]; 8] {
        let [h, w, l] = hwl;
        let (s, c) = ry.sin_cos();
        let xs = [l / 2.0, -l / 2.0];
        let ys = [0.0, -h];
        let zs = [w / 2.0, -w / 2.0];
        let mut out = [[0.0; 3]; 8];
        let mut i = 0;
        for y in ys {
            for x in xs {
                for z in zs {
                    out[i] = [
                        location[0] + c * x + s * z,
                        location[1] + y,
                        location[2] - s * x + c * z,
                    ];
                    i += 1;
                }
            }
        }
        out
    }

    fn assert_same_corner_set(a: &[[f64; 3]], b: &[[f64; 3]], tol: f64) {
        for p in a {
            assert!(
                b.iter()
                    .any(|q| q.iter().zip(p.iter()).all(|(x, y)| (x - y).abs() < tol)),
                "corner {p:?} unmatched"
            );
        }
    }

    #[test]
    fn label_box_corner_round_trip() {
        let calib = nominal_calib();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let location = [
                rng.random_range(-10.0..10.0),
                rng.random_range(0.5..2.5),
                rng.random_range(5.0..60.0),
            ];
            let hwl = [
                rng.random_range(1.2..2.0),
                rng.random_range(1.4..2.0),
                rng.random_range(3.2..4.6),
            ];
            let ry = rng.random_range(-PI..=PI);
            let bbox = calib.camera_box_to_lidar(location, hwl, ry).unwrap();
            // project the LiDAR corners back to camera and match the originals
            let cam_back: Vec<[f64; 3]> = bbox
                .corners()
                .iter()
                .map(|p| calib.lidar_to_camera(*p))
                .collect();
            let cam_ref = camera_corners(location, hwl, ry);
            assert_same_corner_set(&cam_back, &cam_ref, 1e-6);
        }
    }

    #[test]
    fn label_yaw_convention() {
        let calib = nominal_calib();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("label.txt");
        std::fs::write(
            &path,
            "Car 0.00 0 1.55 300.0 150.0 400.0 220.0 1.50 1.60 3.90 2.0 1.5 20.0 0.0\n",
        )
        .unwrap();
        let labels = read_labels(&path, &calib).unwrap();
        assert_eq!(labels.len(), 1);
        let bbox = labels[0].box3d.unwrap();
        assert!((bbox.yaw - normalize_angle(-FRAC_PI_2)).abs() < 1e-12);
        assert_eq!(bbox.size, [3.9, 1.6, 1.5]);
    }

    #[test]
    fn label_dont_care_flagged() {
        let calib = nominal_calib();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("label.txt");
        std::fs::write(
            &path,
            "DontCare -1 -1 -10 500.0 160.0 550.0 190.0 -1 -1 -1 -1000 -1000 -1000 -10\n",
        )
        .unwrap();
        let labels = read_labels(&path, &calib).unwrap();
        assert!(labels[0].dont_care);
        assert!(labels[0].box3d.is_none());
    }

    #[test]
    fn label_wrong_column_count() {
        let calib = nominal_calib();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("label.txt");
        std::fs::write(&path, "Car 0.0 0 0.0 1 2 3 4\n").unwrap();
        match read_labels(&path, &calib) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "line 1"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn labels_write_read_round_trip() {
        let calib = nominal_calib();
        let bbox = OrientedBox3D::new([18.0, -3.0, -0.7], [3.9, 1.6, 1.56], 0.8).unwrap();
        let gt = GroundTruth {
            class_label: "Car".into(),
            truncation: 0.0,
            occlusion: 1,
            alpha: -0.2,
            bbox2d: [300.0, 150.0, 420.0, 230.0],
            box3d: Some(bbox),
            dont_care: false,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("label.txt");
        write_labels(&path, std::slice::from_ref(&gt), &calib).unwrap();
        let back = read_labels(&path, &calib).unwrap();
        let bb = back[0].box3d.unwrap();
        for (a, b) in bb.center.iter().zip(bbox.center.iter()) {
            assert!((a - b).abs() < 1e-4);
        }
        assert!((bb.yaw - bbox.yaw).abs() < 1e-4);
    }

    #[test]
    fn calibration_write_read_round_trip() {
        let calib = nominal_calib();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calib.txt");
        write_calibration(&path, &calib).unwrap();
        let back = read_calibration(&path).unwrap();
        for (a, b) in back
            .tr_velo_to_cam
            .iter()
            .flatten()
            .zip(calib.tr_velo_to_cam.iter().flatten())
        {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn fuzzed_inputs_never_panic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let dir = tempfile::tempdir().unwrap();
        let calib = nominal_calib();
        for i in 0..200 {
            let len = rng.random_range(0..200);
            let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            let path = dir.path().join(format!("fuzz{i}"));
            std::fs::write(&path, &bytes).unwrap();
            let _ = read_velodyne(&path);
            let _ = read_calibration(&path);
            let _ = read_labels(&path, &calib);
        }
    }
}
