//! Plane-side handover success: the share of human-region points lying ahead
//! of the plane through the grasp point whose normal is the approach axis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{plane_side_fraction, GraspCandidate, PointCloud, Vec3};
use crate::scalar::Real;

pub const DEFAULT_SAMPLE_N: usize = 100;
pub const DEFAULT_THRESHOLD: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneSide {
    /// Points with `(q − T)·z > 0` count, `z` the approach axis.
    AlongApproach,
    AgainstApproach,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessParams {
    pub sample_n: usize,
    pub threshold: f64,
    pub seed: u64,
    /// When false every cloud point is counted once and `sample_n` is unused.
    pub resample: bool,
    pub side: PlaneSide,
}

impl Default for SuccessParams {
    fn default() -> Self {
        Self {
            sample_n: DEFAULT_SAMPLE_N,
            threshold: DEFAULT_THRESHOLD,
            seed: 0,
            resample: true,
            side: PlaneSide::AlongApproach,
        }
    }
}

impl SuccessParams {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_n == 0 {
            return Err(Error::param("sample_n", "must be at least 1"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::param("threshold", format!("{} outside (0, 1)", self.threshold)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessOutcome<T> {
    pub p: T,
    pub success: bool,
    pub counted: usize,
}

pub fn evaluate_success<T: Real>(grasp: &GraspCandidate<T>, pc_human: &PointCloud<T>, params: &SuccessParams) -> Result<SuccessOutcome<T>> {
    params.validate()?;
    if pc_human.is_empty() {
        return Err(Error::Empty("human region cloud"));
    }
    let normal = match params.side {
        PlaneSide::AlongApproach => grasp.approach(),
        PlaneSide::AgainstApproach => -grasp.approach(),
    };
    let p = if params.resample {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let n = pc_human.len();
        let sample: Vec<Vec3<T>> = (0..params.sample_n).map(|_| pc_human.points[rng.random_range(0..n)]).collect();
        plane_side_fraction(&sample, &grasp.translation, &normal)?
    } else {
        plane_side_fraction(&pc_human.points, &grasp.translation, &normal)?
    };
    Ok(SuccessOutcome {
        p,
        success: p > T::lit(params.threshold),
        counted: if params.resample { params.sample_n } else { pc_human.len() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rot3;

    fn down_grasp() -> GraspCandidate<f64> {
        GraspCandidate::new(0, Rot3::identity(), Vec3::zero())
    }

    fn cloud_with(ahead: usize, behind: usize) -> PointCloud<f64> {
        let mut pts = vec![Vec3::new(0.01, 0.0, 0.3); ahead];
        pts.extend(vec![Vec3::new(0.0, 0.02, -0.1); behind]);
        PointCloud::new(pts)
    }

    fn exact() -> SuccessParams {
        SuccessParams {
            resample: false,
            ..SuccessParams::default()
        }
    }

    #[test]
    fn all_ahead_and_all_behind() {
        let r = evaluate_success(&down_grasp(), &cloud_with(50, 0), &SuccessParams::with_seed(3)).unwrap();
        assert_eq!((r.p, r.success, r.counted), (1.0, true, 100));
        let r = evaluate_success(&down_grasp(), &cloud_with(0, 50), &SuccessParams::with_seed(3)).unwrap();
        assert_eq!((r.p, r.success), (0.0, false));
    }

    #[test]
    fn threshold_boundary() {
        let r = evaluate_success(&down_grasp(), &cloud_with(80, 20), &exact()).unwrap();
        assert_eq!((r.p, r.success), (0.8, false));
        let r = evaluate_success(&down_grasp(), &cloud_with(81, 19), &exact()).unwrap();
        assert_eq!((r.p, r.success), (0.81, true));
    }

    #[test]
    fn points_on_plane_do_not_count() {
        let mut c = cloud_with(9, 0);
        c.points.push(Vec3::new(0.5, 0.5, 0.0));
        let r = evaluate_success(&down_grasp(), &c, &exact()).unwrap();
        assert_eq!(r.p, 0.9);
    }

    #[test]
    fn side_flip_and_errors() {
        let p = SuccessParams {
            side: PlaneSide::AgainstApproach,
            ..exact()
        };
        assert_eq!(evaluate_success(&down_grasp(), &cloud_with(3, 1), &p).unwrap().p, 0.25);
        assert!(evaluate_success(&down_grasp(), &PointCloud::new(vec![]), &exact()).is_err());
        let bad = SuccessParams { threshold: 1.0, ..exact() };
        assert!(evaluate_success(&down_grasp(), &cloud_with(1, 0), &bad).is_err());
    }

    #[test]
    fn seeded_sampling_repeats() {
        let c = cloud_with(60, 40);
        let a = evaluate_success(&down_grasp(), &c, &SuccessParams::with_seed(11)).unwrap();
        let b = evaluate_success(&down_grasp(), &c, &SuccessParams::with_seed(11)).unwrap();
        assert_eq!(a, b);
    }
}
