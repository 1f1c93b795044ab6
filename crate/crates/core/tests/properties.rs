//! Property tests over the crate's documented invariants.

use proptest::prelude::*;

use pcd_core::geometry::{bev_iou, iou_3d, normalize_angle, OrientedBox3D};
use pcd_core::kitti::{Point, PointCloud};
use pcd_core::partition::{partition_points, RegionSpec};
use pcd_core::sampling::{
    allocate_budget, farthest_point_sampling, sample_region, FpsStart, StrategySpec,
};
use pcd_core::targets::{decode_bin_targets, encode_bin_targets, BinConfig, BinTarget};
use pcd_core::DensityStats;

fn arb_box() -> impl Strategy<Value = OrientedBox3D> {
    (
        (-50.0..50.0f64, -50.0..50.0f64, -3.0..3.0f64),
        (0.3..6.0f64, 0.3..4.0f64, 0.3..3.0f64),
        -10.0..10.0f64,
    )
        .prop_map(|(c, s, yaw)| {
            OrientedBox3D::new([c.0, c.1, c.2], [s.0, s.1, s.2], yaw).unwrap()
        })
}

proptest! {
    #[test]
    fn normalize_angle_lands_in_half_open_interval(a in -100.0..100.0f64) {
        let n = normalize_angle(a);
        prop_assert!(n > -std::f64::consts::PI && n <= std::f64::consts::PI);
        // same direction
        prop_assert!(((n - a).rem_euclid(2.0 * std::f64::consts::PI)).abs() < 1e-6
            || ((n - a).rem_euclid(2.0 * std::f64::consts::PI) - 2.0 * std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn iou_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
        let v2 = bev_iou(&a, &b);
        let v3 = iou_3d(&a, &b);
        prop_assert_eq!(v2, bev_iou(&b, &a));
        prop_assert_eq!(v3, iou_3d(&b, &a));
        prop_assert!((0.0..=1.0).contains(&v2));
        prop_assert!((0.0..=1.0).contains(&v3));
        prop_assert!(v3 <= v2 + 1e-12); // vertical overlap can only shrink IoU
    }

    // clipping returns the same polygon cyclically rotated, so the shoelace
    // sum can differ in the last bits
    #[test]
    fn iou_of_box_with_itself_is_one(a in arb_box()) {
        prop_assert!((bev_iou(&a, &a) - 1.0).abs() < 1e-12);
        prop_assert!((iou_3d(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partition_covers_in_range_points_once_without_overlap(
        ranges in prop::collection::vec(0.0..70.0f64, 1..300),
        overlap in 0.0..19.0f64,
    ) {
        let cloud = PointCloud::new(
            ranges.iter().map(|&r| Point { x: r as f32, y: 0.0, z: 0.0, r: 0.5 }).collect(),
            "p",
        );
        let spec = RegionSpec::new(20.0, 40.0, 70.0, overlap).unwrap();
        let p = partition_points(&cloud, &spec);
        let mut membership = vec![0u8; ranges.len()];
        for i in p.near.iter().chain(&p.mid).chain(&p.far) {
            membership[*i] += 1;
        }
        for (i, &m) in membership.iter().enumerate() {
            prop_assert!(m >= 1, "point {i} uncovered");
            prop_assert!(m <= 2, "point {i} in {m} regions");
            if overlap == 0.0 {
                prop_assert_eq!(m, 1);
            }
        }
    }

    #[test]
    fn budgets_always_sum_to_total(
        m1 in 6_000.0..15_000.0f64,
        m2 in 1_500.0..5_000.0f64,
        m3 in 400.0..2_000.0f64,
        s2 in 0.0..1_500.0f64,
        s3 in 0.0..800.0f64,
        n in 1u8..=4,
    ) {
        let stats = DensityStats { mean: [m1, m2, m3], sigma: [0.0, s2, s3], n_scenes: 10 };
        if let Ok(b) = allocate_budget(&stats, &StrategySpec::numbered(n).unwrap(), 16_384) {
            prop_assert_eq!(b.near + b.mid + b.far, 16_384);
            prop_assert_eq!(b.total, 16_384);
            prop_assert!(b.mid % 1024 == 0 && b.far % 1024 == 0);
        }
    }

    #[test]
    fn sample_region_is_deterministic_and_sized(
        n_points in 1usize..200,
        budget in 1usize..300,
        seed in any::<u64>(),
    ) {
        let points: Vec<usize> = (0..n_points).collect();
        let a = sample_region(&points, budget, seed).unwrap();
        let b = sample_region(&points, budget, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.indices.len(), budget);
        prop_assert!(a.indices.iter().all(|i| *i < n_points));
        if n_points < budget {
            // repetition rule: every point appears at least once
            for p in &points {
                prop_assert!(a.indices.contains(p));
            }
        }
    }

    #[test]
    fn fps_deterministic_and_valid(
        coords in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 1..120),
        k in 1usize..40,
    ) {
        let pts: Vec<[f64; 3]> = coords.iter().map(|&(x, y)| [x, y, 0.0]).collect();
        let a = farthest_point_sampling(&pts, k, FpsStart::NearestCentroid).unwrap();
        let b = farthest_point_sampling(&pts, k, FpsStart::NearestCentroid).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.len(), k);
        prop_assert!(a.iter().all(|i| *i < pts.len()));
    }

    #[test]
    fn encode_decode_identity_for_in_range_targets(
        dx in -2.99..2.99f64,
        dy in -2.99..2.99f64,
        dz in -1.5..1.5f64,
        yaw in -3.1..3.1f64,
        l in 3.0..5.0f64,
        w in 1.3..2.0f64,
        h in 1.2..2.0f64,
    ) {
        let cfg = BinConfig::default();
        let proposal = [5.0, -3.0, 0.2];
        let gt = OrientedBox3D::new(
            [proposal[0] + dx, proposal[1] + dy, proposal[2] + dz],
            [l, w, h],
            yaw,
        ).unwrap();
        let BinTarget::Encoded(enc) = encode_bin_targets(proposal, &gt, &cfg).unwrap() else {
            return Err(TestCaseError::fail("target unexpectedly out of range"));
        };
        prop_assert!(enc.res_x >= -0.5 && enc.res_x < 0.5);
        prop_assert!(enc.res_y >= -0.5 && enc.res_y < 0.5);
        prop_assert!(enc.res_yaw >= -0.5 && enc.res_yaw < 0.5);
        let back = decode_bin_targets(proposal, &enc, &cfg).unwrap();
        for (a, b) in back.center.iter().zip(gt.center.iter()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        for (a, b) in back.size.iter().zip(gt.size.iter()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        prop_assert!(normalize_angle(back.yaw - gt.yaw).abs() < 1e-9);
    }

    /// Parsing is total: arbitrary bytes never panic, they parse or error.
    #[test]
    fn velodyne_parsing_is_total(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fuzz.bin");
        std::fs::write(&path, &bytes).unwrap();
        let _ = pcd_core::kitti::read_velodyne(&path);
    }

    #[test]
    fn label_parsing_is_total(text in "[ -~\n]{0,400}") {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fuzz.txt");
        std::fs::write(&path, &text).unwrap();
        let calib = pcd_core::synth::nominal_calibration();
        let _ = pcd_core::kitti::read_labels(&path, &calib);
        let _ = pcd_core::kitti::read_calibration(&path);
    }
}
