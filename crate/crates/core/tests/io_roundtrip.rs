use handover_core::geometry::{GraspCandidate, PointCloud, Rot3, Vec3};
use handover_core::io::{self, HumanJoints};
use handover_core::raster::{BinaryMask, DepthImage, RgbImage};
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..24, 1usize..24)
}

proptest! {
    #[test]
    fn ppm_round_trips((w, h) in dims(), seed in any::<u64>()) {
        let mut img = RgbImage::new(w, h, [0, 0, 0]);
        for (i, b) in img.data.iter_mut().enumerate() {
            *b = (seed.wrapping_mul(i as u64 + 1) >> 7) as u8;
        }
        prop_assert_eq!(io::decode_ppm(&io::encode_ppm(&img)).unwrap(), img);
    }

    #[test]
    fn mask_round_trips((w, h) in dims(), bits in prop::collection::vec(any::<bool>(), 576)) {
        let mut m = BinaryMask::new(w, h, false);
        m.data.copy_from_slice(&bits[..w * h]);
        prop_assert_eq!(io::decode_mask_pgm(&io::encode_mask_pgm(&m)).unwrap(), m);
    }

    #[test]
    fn depth_round_trips((w, h) in dims(), vals in prop::collection::vec(any::<u16>(), 576)) {
        let mut d = DepthImage::new(w, h);
        d.data.copy_from_slice(&vals[..w * h]);
        prop_assert_eq!(io::decode_depth_pgm16(&io::encode_depth_pgm16(&d)).unwrap(), d);
    }

    #[test]
    fn ply_round_trips(pts in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64, 0.0..5.0f64, 0u32..640, 0u32..480, 0u8..3), 0..64)) {
        let points = pts.iter().map(|p| Vec3::new(p.0, p.1, p.2)).collect();
        let pixels = pts.iter().map(|p| (p.3, p.4)).collect();
        let labels: Vec<u8> = pts.iter().map(|p| p.5).collect();
        let cloud = PointCloud::with_pixels(points, pixels).unwrap();
        let back = io::decode_ply(&io::encode_ply(&cloud, Some(&labels)).unwrap()).unwrap();
        prop_assert_eq!(back.cloud, cloud);
        prop_assert_eq!(back.labels, Some(labels));
    }

    #[test]
    fn grasps_json_round_trips(items in prop::collection::vec((prop::array::uniform3(-1.0..1.0f64), 0.0..3.1f64, prop::array::uniform3(-1.0..1.0f64)), 0..16)) {
        let grasps: Vec<GraspCandidate<f64>> = items
            .iter()
            .enumerate()
            .filter_map(|(i, (a, t, p))| {
                let axis = Vec3::new(a[0], a[1], a[2]).normalized()?;
                Some(GraspCandidate::new(i, Rot3::from_axis_angle(axis, *t), Vec3::new(p[0], p[1], p[2])))
            })
            .collect();
        prop_assert_eq!(io::decode_grasps_json(&io::encode_grasps_json(&grasps)).unwrap(), grasps);
    }

    #[test]
    fn joints_round_trip(s in prop::array::uniform3(-2.0..2.0f64), e in prop::array::uniform3(-2.0..2.0f64), w in prop::array::uniform3(-2.0..2.0f64)) {
        let v = |a: [f64; 3]| Vec3::new(a[0], a[1], a[2]);
        let j = HumanJoints { shoulder: v(s), elbow: v(e), wrist: v(w) };
        prop_assume!(j.validate().is_ok());
        prop_assert_eq!(io::decode_human_joints(&io::encode_human_joints(&j)).unwrap(), j);
    }
}

#[test]
fn ascii_pgm_masks_are_accepted() {
    let m = io::decode_mask_pgm(b"P2\n3 1\n255\n0 127 128\n").unwrap();
    assert_eq!(m.data, vec![false, false, true]);
}

#[test]
fn wrong_depth_maxval_is_rejected() {
    let e = io::decode_depth_pgm16(b"P5\n1 1\n255\n\x00").unwrap_err();
    assert_eq!(e.name(), "Format");
}

#[test]
fn non_rotation_grasp_is_rejected() {
    let text = br#"[{"id":0,"rotation":[[2,0,0],[0,1,0],[0,0,1]],"translation":[0,0,0]}]"#;
    assert!(io::decode_grasps_json(text).is_err());
}
