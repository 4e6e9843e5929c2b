//! JSON grasp sets and human joint positions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GraspCandidate, Rot3, Vec3};

const GRASPS: &str = "grasps JSON";
const POSE: &str = "human pose JSON";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraspRecord {
    /// Row-major 3×3 rotation.
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
}

/// Parses a grasp array; ids are assigned by position.
pub fn decode_grasps_json(bytes: &[u8]) -> Result<Vec<GraspCandidate<f64>>> {
    let records: Vec<GraspRecord> = serde_json::from_slice(bytes).map_err(|e| Error::format(GRASPS, e.to_string()))?;
    records
        .into_iter()
        .enumerate()
        .map(|(id, r)| {
            let rotation = Rot3::from_rows(r.rotation).map_err(|e| Error::field(format!("grasps[{id}].rotation"), e.to_string()))?;
            let translation = Vec3::from(r.translation);
            if !translation.is_finite() {
                return Err(Error::field(format!("grasps[{id}].translation"), "non-finite value"));
            }
            if let Some(c) = r.confidence {
                if !(0.0..=1.0).contains(&c) {
                    return Err(Error::field(format!("grasps[{id}].confidence"), format!("{c} outside [0, 1]")));
                }
            }
            Ok(GraspCandidate {
                id,
                rotation,
                translation,
                confidence: r.confidence,
            })
        })
        .collect()
}

pub fn encode_grasps_json(grasps: &[GraspCandidate<f64>]) -> Vec<u8> {
    let records: Vec<GraspRecord> = grasps
        .iter()
        .map(|g| GraspRecord {
            rotation: g.rotation.rows,
            translation: g.translation.into(),
            confidence: g.confidence,
        })
        .collect();
    let mut out = serde_json::to_vec_pretty(&records).expect("grasp records serialize");
    out.push(b'\n');
    out
}

pub fn read_grasps_json(path: impl AsRef<Path>) -> Result<Vec<GraspCandidate<f64>>> {
    decode_grasps_json(&super::read_bytes(path)?)
}

pub fn write_grasps_json(grasps: &[GraspCandidate<f64>], path: impl AsRef<Path>) -> Result<()> {
    super::write_bytes(path, &encode_grasps_json(grasps))
}

/// Receiver arm joint positions in the world frame (meters).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanJoints {
    pub shoulder: Vec3<f64>,
    pub elbow: Vec3<f64>,
    pub wrist: Vec3<f64>,
}

impl HumanJoints {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("shoulder", self.shoulder), ("elbow", self.elbow), ("wrist", self.wrist)] {
            if !p.is_finite() {
                return Err(Error::field(name, "non-finite coordinate"));
            }
        }
        if self.shoulder.distance(&self.elbow) <= 0.0 {
            return Err(Error::field("elbow", "coincides with shoulder"));
        }
        if self.elbow.distance(&self.wrist) <= 0.0 {
            return Err(Error::field("wrist", "coincides with elbow"));
        }
        Ok(())
    }

    pub fn upper_arm_length(&self) -> f64 {
        self.shoulder.distance(&self.elbow)
    }

    pub fn forearm_length(&self) -> f64 {
        self.elbow.distance(&self.wrist)
    }
}

pub fn decode_human_joints(bytes: &[u8]) -> Result<HumanJoints> {
    let j: HumanJoints = serde_json::from_slice(bytes).map_err(|e| Error::format(POSE, e.to_string()))?;
    j.validate()?;
    Ok(j)
}

pub fn encode_human_joints(j: &HumanJoints) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(j).expect("joints serialize");
    out.push(b'\n');
    out
}

pub fn read_human_joints(path: impl AsRef<Path>) -> Result<HumanJoints> {
    decode_human_joints(&super::read_bytes(path)?)
}

pub fn write_human_joints(j: &HumanJoints, path: impl AsRef<Path>) -> Result<()> {
    super::write_bytes(path, &encode_human_joints(j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_grasp_approaches_along_z() {
        let g = decode_grasps_json(br#"[{"rotation":[[1,0,0],[0,1,0],[0,0,1]],"translation":[0,0,0]}]"#).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].id, 0);
        assert_eq!(g[0].approach(), Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(g[0].confidence, None);
    }

    #[test]
    fn reflection_is_rejected() {
        let err = decode_grasps_json(br#"[{"rotation":[[1,0,0],[0,1,0],[0,0,-1]],"translation":[0,0,0]}]"#).unwrap_err();
        match err {
            Error::InvalidField { field, .. } => assert_eq!(field, "grasps[0].rotation"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_arity_and_unknown_fields() {
        assert!(decode_grasps_json(br#"[{"rotation":[[1,0,0],[0,1,0]],"translation":[0,0,0]}]"#).is_err());
        assert!(decode_grasps_json(br#"[{"rotation":[[1,0,0],[0,1,0],[0,0,1]],"translation":[0,0]}]"#).is_err());
        assert!(decode_grasps_json(br#"[{"rotation":[[1,0,0],[0,1,0],[0,0,1]],"translation":[0,0,0],"x":1}]"#).is_err());
        assert!(decode_grasps_json(br#"[{"rotation":[[1,0,0],[0,1,0],[0,0,1]],"translation":[0,0,0],"confidence":1.5}]"#).is_err());
    }

    #[test]
    fn fifty_random_grasps_keep_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let grasps: Vec<_> = (0..50)
            .map(|id| {
                let axis = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                let mut g = GraspCandidate::new(
                    id,
                    Rot3::from_axis_angle(axis, rng.random_range(-3.0..3.0)),
                    Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0)),
                );
                g.confidence = Some(rng.random_range(0.0..1.0));
                g
            })
            .collect();
        let back = decode_grasps_json(&encode_grasps_json(&grasps)).unwrap();
        assert_eq!(back.len(), 50);
        for (i, (a, b)) in grasps.iter().zip(&back).enumerate() {
            assert_eq!(b.id, i);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn joints_validation() {
        let ok = br#"{"shoulder":[0,0,1.4],"elbow":[0,0,1.1],"wrist":[0.25,0,1.1]}"#;
        let j = decode_human_joints(ok).unwrap();
        assert!((j.upper_arm_length() - 0.3).abs() < 1e-12);
        assert!((j.forearm_length() - 0.25).abs() < 1e-12);
        let bad = br#"{"shoulder":[0,0,1.4],"elbow":[0,0,1.4],"wrist":[0.25,0,1.1]}"#;
        assert!(decode_human_joints(bad).is_err());
    }
}
