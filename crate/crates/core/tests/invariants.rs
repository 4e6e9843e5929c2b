use std::collections::BTreeSet;

use handover_core::ergonomics::{
    angle_grid, build_task_plane, ergonomic_cost, forward_kinematics, joint_torques, solve_handover_point, ArmModel, SolveParams,
};
use handover_core::geometry::{GraspCandidate, PointCloud, Rot3, Vec3};
use handover_core::grounding::RegionMaskSet;
use handover_core::selection::{normalize, select, SelectionMode, SelectionParams};
use proptest::prelude::*;

fn vec3(half: f64) -> impl Strategy<Value = Vec3<f64>> {
    (-half..half, -half..half, -half..half).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn rotation() -> impl Strategy<Value = Rot3<f64>> {
    (vec3(1.0), 0.0..std::f64::consts::PI).prop_filter_map("degenerate axis", |(a, t)| a.normalized().map(|u| Rot3::from_axis_angle(u, t)))
}

fn grasps(max: usize) -> impl Strategy<Value = Vec<GraspCandidate<f64>>> {
    prop::collection::vec((rotation(), vec3(0.1)), 2..max)
        .prop_map(|v| v.into_iter().enumerate().map(|(i, (r, t))| GraspCandidate::new(i, r, t)).collect())
}

/// Human points on the first half of the grasps, robot points on the rest.
fn split_regions(g: &[GraspCandidate<f64>]) -> RegionMaskSet<f64> {
    let half = g.len() / 2;
    let h = g[..half.max(1)].iter().map(|g| g.translation).collect();
    let r = g[half.max(1)..].iter().map(|g| g.translation).collect();
    RegionMaskSet::from_clouds(PointCloud::new(h), PointCloud::new(r))
}

proptest! {
    #[test]
    fn normalize_has_zero_mean_unit_spread(v in prop::collection::vec(-1e3..1e3f64, 1..64)) {
        let z = normalize(&v);
        prop_assert_eq!(z.len(), v.len());
        let n = v.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        if z.iter().all(|x| *x == 0.0) {
            let m = v.iter().sum::<f64>() / n;
            prop_assert!(v.iter().all(|x| (x - m).abs() < 1e-9));
        } else {
            prop_assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn normalize_ignores_positive_affine_maps(v in prop::collection::vec(-10.0..10.0f64, 2..32), a in 0.1..10.0f64, b in -5.0..5.0f64) {
        let z = normalize(&v);
        let w: Vec<f64> = v.iter().map(|x| a * x + b).collect();
        for (p, q) in z.iter().zip(normalize(&w)) {
            prop_assert!((p - q).abs() < 1e-6);
        }
    }

    #[test]
    fn full_mode_picks_from_robot_region(g in grasps(24), alpha in 0.0..=1.0f64) {
        let regions = split_regions(&g);
        let p = SelectionParams { alpha, ..SelectionParams::default() };
        let r = select(&g, &regions, &p).unwrap();
        let robot: BTreeSet<usize> = r.g_robot_ids.iter().copied().collect();
        prop_assert!(robot.contains(&r.chosen.id));
        prop_assert!(r.pool_ids.iter().all(|i| robot.contains(i)));
        // Every grasp sits on a point of its own region.
        let half = (g.len() / 2).max(1);
        prop_assert!((0..half).all(|i| r.g_human_ids.contains(&i)));
        prop_assert!((half..g.len()).all(|i| robot.contains(&i)));
    }

    #[test]
    fn pure_weights_follow_one_statistic(g in grasps(24)) {
        let regions = split_regions(&g);
        for (alpha, pick) in [(1.0, 0usize), (0.0, 1)] {
            let r = select(&g, &regions, &SelectionParams { alpha, ..SelectionParams::default() }).unwrap();
            let stat = |c: &handover_core::selection::CandidateScore<f64>| if pick == 0 { c.z_distance } else { c.z_angle };
            let best = r.candidates.iter().map(stat).fold(f64::NEG_INFINITY, f64::max);
            let chosen = r.candidates.iter().find(|c| c.id == r.chosen.id).unwrap();
            prop_assert_eq!(stat(chosen), best);
            let first = r.candidates.iter().position(|c| stat(c) == best).unwrap();
            prop_assert_eq!(r.candidates[first].id, r.chosen.id);
        }
    }

    #[test]
    fn random_robot_mode_is_seed_deterministic(g in grasps(24), seed in any::<u64>()) {
        let regions = split_regions(&g);
        let p = SelectionParams::with_mode(SelectionMode::RandomInRobotRegion, seed);
        prop_assert_eq!(select(&g, &regions, &p).unwrap(), select(&g, &regions, &p).unwrap());
    }

    #[test]
    fn forward_kinematics_keeps_segment_lengths(l_u in 0.2..0.4f64, l_f in 0.15..0.35f64, t1 in -45.0..180.0f64, t2 in -15.0..140.0f64, base in vec3(2.0)) {
        let shoulder = Vec3::new(0.0, 0.0, 1.4);
        let plane = match build_task_plane(shoulder, base, Vec3::unit_z()) {
            Ok(p) => p,
            Err(_) => return Ok(()),
        };
        prop_assert!(plane.h.dot(&plane.v).abs() < 1e-12);
        prop_assert!((plane.h.norm() - 1.0).abs() < 1e-12 && (plane.v.norm() - 1.0).abs() < 1e-12);
        let arm = ArmModel::new(l_u, l_f).unwrap();
        let (elbow, wrist) = forward_kinematics(&arm, &plane, t1, t2).unwrap();
        prop_assert!((elbow.distance(&shoulder) - l_u).abs() < 1e-12);
        prop_assert!((wrist.distance(&elbow) - l_f).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn handover_angles_ignore_heading(yaw in 0.0..std::f64::consts::TAU, dist in 0.5..1.1f64, drop in 0.2..0.8f64) {
        let arm = ArmModel::new(0.3, 0.26).unwrap();
        let shoulder = Vec3::new(0.1, -0.2, 1.4);
        let params = SolveParams::default();
        let solve = |heading: f64| {
            let base = shoulder + Vec3::new(heading.cos() * dist, heading.sin() * dist, -drop);
            let plane = build_task_plane(shoulder, base, Vec3::unit_z()).unwrap();
            solve_handover_point(&arm, &plane, &base, &params)
        };
        match (solve(0.0), solve(yaw)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!((a.theta1_deg, a.theta2_deg, a.feasible_cells), (b.theta1_deg, b.theta2_deg, b.feasible_cells));
                let turned = shoulder + Rot3::from_axis_angle(Vec3::unit_z(), yaw).apply(&(a.wrist - shoulder));
                prop_assert!(turned.distance(&b.wrist) < 1e-9);
                prop_assert!((0.0..=1.0).contains(&b.c_torque) && (0.0..=1.0).contains(&b.c_disp));
            }
            (Err(a), Err(b)) => prop_assert_eq!(a.name(), b.name()),
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn finer_grid_never_costs_more(l_u in 0.25..0.35f64, l_f in 0.2..0.3f64, dist in 0.5..0.9f64) {
        let arm = ArmModel::new(l_u, l_f).unwrap();
        let shoulder = Vec3::new(0.0, 0.0, 1.4);
        let base = Vec3::new(dist, 0.0, 0.9);
        let plane = build_task_plane(shoulder, base, Vec3::unit_z()).unwrap();
        let fine = solve_handover_point(&arm, &plane, &base, &SolveParams { granularity_deg: 1.0, ..SolveParams::default() });
        let coarse = solve_handover_point(&arm, &plane, &base, &SolveParams { granularity_deg: 2.0, ..SolveParams::default() });
        let (fine, coarse) = match (fine, coarse) {
            (Ok(f), Ok(c)) => (f, c),
            (Ok(_), Err(_)) | (Err(_), Err(_)) => return Ok(()),
            (Err(e), Ok(_)) => return Err(TestCaseError::fail(format!("fine grid infeasible: {e}"))),
        };
        // Score both optima on the fine grid's normalization.
        let (mut tmax, mut dmax) = (0.0f64, 0.0f64);
        for t1 in angle_grid(-45.0, 180.0, 1.0) {
            for t2 in angle_grid(-15.0, 140.0, 1.0) {
                let (a, b) = joint_torques(&arm, t1, t2);
                tmax = tmax.max(a * a + b * b);
                dmax = dmax.max(ergonomic_cost(&arm, t1, t2, 1.0, 1.0).c_disp);
            }
        }
        let f = ergonomic_cost(&arm, fine.theta1_deg, fine.theta2_deg, tmax, dmax).c_total;
        let c = ergonomic_cost(&arm, coarse.theta1_deg, coarse.theta2_deg, tmax, dmax).c_total;
        prop_assert!(f <= c + 1e-12, "fine {} coarse {}", f, c);
        prop_assert!(coarse.cells_evaluated < fine.cells_evaluated);
    }
}
