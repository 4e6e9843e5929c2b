//! Scene manifests: one JSON document naming the image, depth map, object
//! mask, grasp set and optional human pose of a scene. Relative paths are
//! resolved against the manifest's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::json::{read_grasps_json, read_human_joints, HumanJoints};
use super::pnm::{read_depth_pgm16, read_image_ppm, read_mask_pgm};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, GraspCandidate};
use crate::raster::{BBox, BinaryMask, DepthImage, RgbImage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub image_path: PathBuf,
    pub depth_path: PathBuf,
    /// Meters per raw depth unit.
    pub depth_scale: f64,
    pub intrinsics: CameraIntrinsics<f64>,
    pub bbox: BBox,
    pub object_mask_path: PathBuf,
    pub grasps_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_pose_path: Option<PathBuf>,
    pub object_query: String,
}

impl SceneManifest {
    /// Checks the invariants that do not need the referenced files.
    pub fn validate(&self) -> Result<()> {
        if !(self.depth_scale > 0.0 && self.depth_scale.is_finite()) {
            return Err(Error::field("depth_scale", "must be positive"));
        }
        self.intrinsics.validate()?;
        if !self.bbox.fits_in(self.intrinsics.width, self.intrinsics.height) {
            return Err(Error::field(
                "bbox",
                format!(
                    "{:?} is empty or extends past the {}x{} image",
                    <[usize; 4]>::from(self.bbox),
                    self.intrinsics.width,
                    self.intrinsics.height
                ),
            ));
        }
        if self.object_query.trim().is_empty() {
            return Err(Error::field("object_query", "must not be empty"));
        }
        Ok(())
    }
}

pub fn parse_manifest(bytes: &[u8]) -> Result<SceneManifest> {
    let m: SceneManifest = serde_json::from_slice(bytes).map_err(|e| Error::format("manifest JSON", e.to_string()))?;
    m.validate()?;
    Ok(m)
}

pub fn write_manifest(m: &SceneManifest, path: impl AsRef<Path>) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(m).expect("manifest serializes");
    bytes.push(b'\n');
    super::write_bytes(path, &bytes)
}

/// Fully loaded and validated scene.
#[derive(Clone, Debug)]
pub struct SceneBundle {
    pub manifest: SceneManifest,
    pub base_dir: PathBuf,
    pub image: RgbImage,
    pub depth: DepthImage,
    pub object_mask: BinaryMask,
    pub grasps: Vec<GraspCandidate<f64>>,
    pub human: Option<HumanJoints>,
}

impl SceneBundle {
    pub fn intrinsics(&self) -> &CameraIntrinsics<f64> {
        &self.manifest.intrinsics
    }

    pub fn bbox(&self) -> BBox {
        self.manifest.bbox
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }
}

fn check_dims(field: &str, w: usize, h: usize, k: &CameraIntrinsics<f64>) -> Result<()> {
    if (w, h) != (k.width, k.height) {
        return Err(Error::field(
            field,
            format!("is {w}x{h} but intrinsics are {}x{}", k.width, k.height),
        ));
    }
    Ok(())
}

fn tag_field<T>(field: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io { .. } | Error::InvalidField { .. } => e,
        other => Error::field(field, other.to_string()),
    })
}

pub fn read_scene(manifest_path: impl AsRef<Path>) -> Result<SceneBundle> {
    let manifest_path = manifest_path.as_ref();
    let manifest = parse_manifest(&super::read_bytes(manifest_path)?)?;
    let base_dir = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let k = manifest.intrinsics;

    let image = tag_field("image_path", read_image_ppm(base_dir.join(&manifest.image_path)))?;
    check_dims("image_path", image.width, image.height, &k)?;
    let depth = tag_field("depth_path", read_depth_pgm16(base_dir.join(&manifest.depth_path)))?;
    check_dims("depth_path", depth.width, depth.height, &k)?;
    let object_mask = tag_field("object_mask_path", read_mask_pgm(base_dir.join(&manifest.object_mask_path)))?;
    check_dims("object_mask_path", object_mask.width, object_mask.height, &k)?;
    let grasps = read_grasps_json(base_dir.join(&manifest.grasps_path))?;
    let human = match &manifest.human_pose_path {
        Some(p) => Some(tag_field("human_pose_path", read_human_joints(base_dir.join(p)))?),
        None => None,
    };

    Ok(SceneBundle {
        manifest,
        base_dir,
        image,
        depth,
        object_mask,
        grasps,
        human,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> SceneManifest {
        SceneManifest {
            image_path: "image.ppm".into(),
            depth_path: "depth.pgm".into(),
            depth_scale: 0.001,
            intrinsics: CameraIntrinsics::new(100.0, 100.0, 5.0, 5.0, 10, 10).unwrap(),
            bbox: BBox::new(2, 2, 6, 6),
            object_mask_path: "mask.pgm".into(),
            grasps_path: "grasps.json".into(),
            human_pose_path: None,
            object_query: "mug".into(),
        }
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scene.json");
        let m = manifest();
        write_manifest(&m, &p).unwrap();
        assert_eq!(parse_manifest(&std::fs::read(&p).unwrap()).unwrap(), m);
    }

    #[test]
    fn bbox_past_edge_names_bbox() {
        let mut m = manifest();
        m.bbox = BBox::new(5, 5, 6, 2);
        match m.validate().unwrap_err() {
            Error::InvalidField { field, .. } => assert_eq!(field, "bbox"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn bad_scale_and_query() {
        let mut m = manifest();
        m.depth_scale = 0.0;
        assert!(m.validate().is_err());
        let mut m = manifest();
        m.object_query = "  ".into();
        assert!(m.validate().is_err());
    }
}
