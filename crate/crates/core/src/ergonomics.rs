//! Receiver-side handover point: a two-link planar arm in the vertical plane
//! through the shoulder and the robot base, posed to minimize static joint
//! torque plus displacement from mid-range.
//!
//! Angles are measured from the downward vertical. `θ1 = 0` is a hanging arm,
//! positive `θ1` swings toward the robot, `θ2` is elbow flexion with `0`
//! meaning a straight arm.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::io::HumanJoints;
use crate::scalar::Real;

pub const UPPER_ARM_MASS: f64 = 2.6;
pub const FOREARM_MASS: f64 = 1.8;
pub const GRAVITY: f64 = 9.80665;
pub const THETA1_RANGE_DEG: (f64, f64) = (-45.0, 180.0);
pub const THETA2_RANGE_DEG: (f64, f64) = (-15.0, 140.0);
pub const DEFAULT_MAX_REACH: f64 = 0.9;
pub const DEFAULT_GRANULARITY_DEG: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmModel<T> {
    pub l_u: T,
    pub l_f: T,
    pub m_u: T,
    pub m_f: T,
    pub g: T,
    /// Degrees, inclusive.
    pub theta1_range: (T, T),
    pub theta2_range: (T, T),
}

impl<T: Real> ArmModel<T> {
    pub fn new(l_u: T, l_f: T) -> Result<Self> {
        let arm = Self {
            l_u,
            l_f,
            m_u: T::lit(UPPER_ARM_MASS),
            m_f: T::lit(FOREARM_MASS),
            g: T::lit(GRAVITY),
            theta1_range: (T::lit(THETA1_RANGE_DEG.0), T::lit(THETA1_RANGE_DEG.1)),
            theta2_range: (T::lit(THETA2_RANGE_DEG.0), T::lit(THETA2_RANGE_DEG.1)),
        };
        arm.validate()?;
        Ok(arm)
    }

    /// Segment lengths from tracked shoulder, elbow and wrist positions.
    pub fn from_joints(j: &HumanJoints) -> Result<Self> {
        j.validate()?;
        Self::new(T::lit(j.upper_arm_length()), T::lit(j.forearm_length()))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("l_u", self.l_u),
            ("l_f", self.l_f),
            ("m_u", self.m_u),
            ("m_f", self.m_f),
            ("g", self.g),
        ] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::param(name, format!("{v} must be positive and finite")));
            }
        }
        for (name, (lo, hi)) in [("theta1_range", self.theta1_range), ("theta2_range", self.theta2_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::param(name, format!("[{lo}, {hi}] is not an increasing finite interval")));
            }
        }
        Ok(())
    }

    /// Range midpoints in degrees.
    pub fn theta_mid(&self) -> (T, T) {
        let two = T::lit(2.0);
        (
            (self.theta1_range.0 + self.theta1_range.1) / two,
            (self.theta2_range.0 + self.theta2_range.1) / two,
        )
    }

    fn check_angles(&self, theta1: T, theta2: T) -> Result<()> {
        for (joint, th, (lo, hi)) in [(1u8, theta1, self.theta1_range), (2, theta2, self.theta2_range)] {
            if !(th >= lo && th <= hi) {
                return Err(Error::AngleOutOfRange {
                    joint,
                    degrees: th.as_f64(),
                    min: lo.as_f64(),
                    max: hi.as_f64(),
                });
            }
        }
        Ok(())
    }
}

/// Vertical plane through the shoulder containing the robot base direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Copy + Serialize", deserialize = "T: Copy + Deserialize<'de>"))]
pub struct TaskPlane<T> {
    pub origin: Vec3<T>,
    /// Unit, horizontal, toward the robot base.
    pub h: Vec3<T>,
    /// Unit world up.
    pub v: Vec3<T>,
}

pub fn build_task_plane<T: Real>(shoulder: Vec3<T>, robot_base: Vec3<T>, up: Vec3<T>) -> Result<TaskPlane<T>> {
    let v = up.normalized().ok_or_else(|| Error::param("up", "zero-length vector"))?;
    let d = robot_base - shoulder;
    let horizontal = d - v * d.dot(&v);
    // Relative floor so a base numerically above the shoulder still counts as degenerate.
    if horizontal.norm() <= T::lit(1e-9) * (T::one() + d.norm()) {
        return Err(Error::DegeneratePlane);
    }
    let h = horizontal.normalized().ok_or(Error::DegeneratePlane)?;
    Ok(TaskPlane { origin: shoulder, h, v })
}

/// Elbow and wrist positions in the world frame for angles in degrees.
pub fn forward_kinematics<T: Real>(arm: &ArmModel<T>, plane: &TaskPlane<T>, theta1: T, theta2: T) -> Result<(Vec3<T>, Vec3<T>)> {
    arm.check_angles(theta1, theta2)?;
    Ok(fk_unchecked(arm, plane, theta1.to_radians(), theta2.to_radians()))
}

fn fk_unchecked<T: Real>(arm: &ArmModel<T>, plane: &TaskPlane<T>, t1: T, t2: T) -> (Vec3<T>, Vec3<T>) {
    let elbow = plane.origin + (plane.h * t1.sin() - plane.v * t1.cos()) * arm.l_u;
    let t12 = t1 + t2;
    let wrist = elbow + (plane.h * t12.sin() - plane.v * t12.cos()) * arm.l_f;
    (elbow, wrist)
}

/// Static gravity torques (N·m) at shoulder and elbow; segment masses act at
/// segment midpoints. Angles in degrees.
pub fn joint_torques<T: Real>(arm: &ArmModel<T>, theta1: T, theta2: T) -> (T, T) {
    torques_rad(arm, theta1.to_radians(), theta2.to_radians())
}

fn torques_rad<T: Real>(arm: &ArmModel<T>, t1: T, t2: T) -> (T, T) {
    let half = T::lit(0.5);
    let s1 = t1.sin();
    let s12 = (t1 + t2).sin();
    let tau2 = arm.g * arm.m_f * arm.l_f * half * s12;
    let tau1 = arm.g * (arm.m_u * arm.l_u * half * s1 + arm.m_f * (arm.l_u * s1 + arm.l_f * half * s12));
    (tau1, tau2)
}

/// Squared distance from mid-range in radians².
fn displacement_rad<T: Real>(mid: (T, T), t1: T, t2: T) -> T {
    let d1 = mid.0 - t1;
    let d2 = mid.1 - t2;
    d1 * d1 + d2 * d2
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgoCost<T> {
    pub c_total: T,
    pub c_torque: T,
    pub c_disp: T,
}

/// Normalized cost at angles in degrees. Both maxima must be positive.
pub fn ergonomic_cost<T: Real>(arm: &ArmModel<T>, theta1: T, theta2: T, c_torque_max: T, c_disp_max: T) -> ErgoCost<T> {
    let mid = arm.theta_mid();
    cost_rad(
        arm,
        (mid.0.to_radians(), mid.1.to_radians()),
        theta1.to_radians(),
        theta2.to_radians(),
        c_torque_max,
        c_disp_max,
    )
}

fn cost_rad<T: Real>(arm: &ArmModel<T>, mid_rad: (T, T), t1: T, t2: T, c_torque_max: T, c_disp_max: T) -> ErgoCost<T> {
    let (tau1, tau2) = torques_rad(arm, t1, t2);
    let c_torque = (tau1 * tau1 + tau2 * tau2) / c_torque_max;
    let c_disp = displacement_rad(mid_rad, t1, t2) / c_disp_max;
    ErgoCost {
        c_total: c_torque + c_disp,
        c_torque,
        c_disp,
    }
}

/// Grid values over `[lo, hi]` at `step`, both endpoints included.
pub fn angle_grid<T: Real>(lo: T, hi: T, step: T) -> Vec<T> {
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let v = lo + step * T::from_usize_lossy(k);
        // Values within a hair of `hi` collapse onto it.
        if v >= hi - step * T::lit(1e-9) {
            break;
        }
        out.push(v);
        k += 1;
    }
    out.push(hi);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveParams {
    /// Meters from the robot base; infinity disables the reach check.
    pub max_reach: f64,
    pub granularity_deg: f64,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            max_reach: DEFAULT_MAX_REACH,
            granularity_deg: DEFAULT_GRANULARITY_DEG,
        }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.granularity_deg > 0.0 && self.granularity_deg.is_finite()) {
            return Err(Error::param(
                "granularity_deg",
                format!("{} must be positive", self.granularity_deg),
            ));
        }
        if !(self.max_reach >= 0.0) {
            return Err(Error::param("max_reach", format!("{} must be non-negative", self.max_reach)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Copy + Serialize", deserialize = "T: Copy + Deserialize<'de>"))]
pub struct ErgoResult<T> {
    pub theta1_deg: T,
    pub theta2_deg: T,
    pub wrist: Vec3<T>,
    pub elbow: Vec3<T>,
    pub c_total: T,
    pub c_torque: T,
    pub c_disp: T,
    pub cells_evaluated: usize,
    pub feasible_cells: usize,
}

/// Exhaustive grid search for the reachable pose of least cost. Ties go to the
/// smaller `θ1`, then the smaller `θ2`, so the result is independent of the
/// evaluation order.
pub fn solve_handover_point<T: Real>(
    arm: &ArmModel<T>,
    plane: &TaskPlane<T>,
    robot_base: &Vec3<T>,
    params: &SolveParams,
) -> Result<ErgoResult<T>> {
    arm.validate()?;
    params.validate()?;
    let step = T::lit(params.granularity_deg);
    let g1 = angle_grid(arm.theta1_range.0, arm.theta1_range.1, step);
    let g2 = angle_grid(arm.theta2_range.0, arm.theta2_range.1, step);
    let r1: Vec<T> = g1.iter().map(|d| d.to_radians()).collect();
    let r2: Vec<T> = g2.iter().map(|d| d.to_radians()).collect();
    let mid = arm.theta_mid();
    let mid_rad = (mid.0.to_radians(), mid.1.to_radians());

    let (torque_max, disp_max) = r1
        .par_iter()
        .map(|&t1| {
            r2.iter().fold((T::zero(), T::zero()), |(tm, dm), &t2| {
                let (a, b) = torques_rad(arm, t1, t2);
                (tm.max(a * a + b * b), dm.max(displacement_rad(mid_rad, t1, t2)))
            })
        })
        .reduce(|| (T::zero(), T::zero()), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    if !(torque_max > T::zero() && disp_max > T::zero()) {
        return Err(Error::param("granularity_deg", "grid too coarse to normalize the cost"));
    }

    let reach = T::lit(params.max_reach);
    let rows: Vec<(usize, Option<(T, usize)>)> = r1
        .par_iter()
        .map(|&t1| {
            let mut feasible = 0;
            let mut best: Option<(T, usize)> = None;
            for (j, &t2) in r2.iter().enumerate() {
                let (_, wrist) = fk_unchecked(arm, plane, t1, t2);
                if wrist.distance(robot_base) > reach {
                    continue;
                }
                feasible += 1;
                let c = cost_rad(arm, mid_rad, t1, t2, torque_max, disp_max).c_total;
                if best.is_none_or(|(b, _)| c < b) {
                    best = Some((c, j));
                }
            }
            (feasible, best)
        })
        .collect();

    let feasible_cells = rows.iter().map(|r| r.0).sum();
    let mut best: Option<(T, usize, usize)> = None;
    for (i, (_, row)) in rows.iter().enumerate() {
        if let Some((c, j)) = *row {
            if best.is_none_or(|(b, _, _)| c < b) {
                best = Some((c, i, j));
            }
        }
    }
    let (_, i, j) = best.ok_or(Error::NoFeasiblePoint {
        max_reach: params.max_reach,
    })?;
    let cost = cost_rad(arm, mid_rad, r1[i], r2[j], torque_max, disp_max);
    let (elbow, wrist) = fk_unchecked(arm, plane, r1[i], r2[j]);
    Ok(ErgoResult {
        theta1_deg: g1[i],
        theta2_deg: g2[j],
        wrist,
        elbow,
        c_total: cost.c_total,
        c_torque: cost.c_torque,
        c_disp: cost.c_disp,
        cells_evaluated: g1.len() * g2.len(),
        feasible_cells,
    })
}

/// Plane construction, arm lengths from the tracked joints, and grid search.
pub fn plan_handover(joints: &HumanJoints, robot_base: Vec3<f64>, up: Vec3<f64>, params: &SolveParams) -> Result<ErgoResult<f64>> {
    let arm = ArmModel::from_joints(joints)?;
    let plane = build_task_plane(joints.shoulder, robot_base, up)?;
    solve_handover_point(&arm, &plane, &robot_base, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane() -> TaskPlane<f64> {
        build_task_plane(Vec3::new(0.0, 0.0, 1.4), Vec3::new(1.0, 0.0, 0.0), Vec3::unit_z()).unwrap()
    }

    #[test]
    fn plane_basis() {
        let p = plane();
        assert_eq!(p.h, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(p.v, Vec3::unit_z());
        let e = build_task_plane(Vec3::new(0.0, 0.0, 1.4), Vec3::zero(), Vec3::unit_z()).unwrap_err();
        assert_eq!(e.name(), "DegeneratePlane");
    }

    #[test]
    fn fk_reference_poses() {
        let arm = ArmModel::<f64>::new(0.3, 0.25).unwrap();
        let p = plane();
        let (_, w) = forward_kinematics(&arm, &p, 90.0, 0.0).unwrap();
        assert!(w.distance(&Vec3::new(0.55, 0.0, 1.4)) < 1e-12);
        let (e, w) = forward_kinematics(&arm, &p, 0.0, 0.0).unwrap();
        assert!(e.distance(&Vec3::new(0.0, 0.0, 1.1)) < 1e-12);
        assert!(w.distance(&Vec3::new(0.0, 0.0, 0.85)) < 1e-12);
        assert_eq!(forward_kinematics(&arm, &p, 181.0, 0.0).unwrap_err().name(), "AngleOutOfRange");
        assert_eq!(forward_kinematics(&arm, &p, 0.0, -16.0).unwrap_err().name(), "AngleOutOfRange");
    }

    #[test]
    fn torques_at_reference_poses() {
        let arm = ArmModel::<f64>::new(0.3, 0.25).unwrap();
        let (t1, t2) = joint_torques(&arm, 90.0, 0.0);
        assert!((t1 - 11.33).abs() < 0.01, "{t1}");
        assert!((t2 - 2.207).abs() < 0.005, "{t2}");
        let (t1, t2) = joint_torques(&arm, 0.0, 0.0);
        assert_eq!((t1, t2), (0.0, 0.0));
    }

    #[test]
    fn displacement_vanishes_at_midpoint() {
        let arm = ArmModel::<f64>::new(0.3, 0.25).unwrap();
        let c = ergonomic_cost(&arm, 67.5, 62.5, 1.0, 1.0);
        assert_eq!(c.c_disp, 0.0);
    }

    #[test]
    fn grid_size_and_endpoints() {
        let g1 = angle_grid(-45.0, 180.0, 1.0);
        let g2 = angle_grid(-15.0, 140.0, 1.0);
        assert_eq!((g1.len(), g2.len()), (226, 156));
        assert_eq!((g1[0], *g1.last().unwrap()), (-45.0, 180.0));
        let g = angle_grid(-45.0, 180.0, 2.0);
        assert_eq!(g.len(), 114);
        assert_eq!(*g.last().unwrap(), 180.0);
    }

    #[test]
    fn solve_counts_cells_and_respects_reach() {
        let arm = ArmModel::<f64>::new(0.3, 0.25).unwrap();
        let base = Vec3::new(0.8, 0.0, 0.8);
        let r = solve_handover_point(&arm, &plane(), &base, &SolveParams::default()).unwrap();
        assert_eq!(r.cells_evaluated, 35_256);
        assert!(r.wrist.distance(&base) <= 0.9);
        assert!(r.c_torque >= 0.0 && r.c_torque <= 1.0 && r.c_disp >= 0.0 && r.c_disp <= 1.0);
        let p = SolveParams {
            max_reach: 0.0,
            ..SolveParams::default()
        };
        assert_eq!(
            solve_handover_point(&arm, &plane(), &base, &p).unwrap_err().name(),
            "NoFeasiblePoint"
        );
    }

    #[test]
    fn f32_solver_runs() {
        let arm = ArmModel::<f32>::new(0.3, 0.25).unwrap();
        let plane = build_task_plane(Vec3::new(0.0f32, 0.0, 1.4), Vec3::new(1.0, 0.0, 0.0), Vec3::unit_z()).unwrap();
        let p = SolveParams {
            max_reach: f64::INFINITY,
            ..SolveParams::default()
        };
        let r = solve_handover_point(&arm, &plane, &Vec3::new(1.0, 0.0, 0.0), &p).unwrap();
        assert_eq!(r.feasible_cells, 35_256);
    }
}
