//! Readers and writers for every on-disk artifact.

mod json;
mod ply;
mod png;
mod pnm;
mod scene;

use std::path::Path;

use crate::error::{Error, Result};

pub use json::{
    decode_grasps_json, decode_human_joints, encode_grasps_json, encode_human_joints, read_grasps_json, read_human_joints,
    write_grasps_json, write_human_joints, HumanJoints,
};
pub use ply::{decode_ply, encode_ply, read_ply, write_ply, PlyCloud};
pub use png::{
    adler32, annotate_grid, annotated_png_bytes, crc32, encode_png_rgb, label_scale, write_annotated_png, GRID_COLOR, TAG_COLOR, TEXT_COLOR,
};
pub use pnm::{
    decode_depth_pgm16, decode_mask_pgm, decode_ppm, encode_depth_pgm16, encode_mask_pgm, encode_ppm, read_depth_pgm16, read_image_ppm,
    read_mask_pgm, write_depth_pgm16, write_image_ppm, write_mask_pgm,
};
pub use scene::{parse_manifest, read_scene, write_manifest, SceneBundle, SceneManifest};

pub(crate) fn read_bytes(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes `bytes`, creating parent directories as needed.
pub fn write_bytes(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
