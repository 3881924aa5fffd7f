//! File formats and the on-disk scene layout.
//!
//! A scene directory holds `images/NNNNNNNN.png`, `cams/NNNNNNNN_cam.txt`,
//! optional `depths/NNNNNNNN.pfm` and `pair.txt`.

mod cam;
mod config;
mod image_io;
mod pfm;
mod ply;
mod scene;
mod volume;

pub use cam::{format_cam, parse_cam, read_cam, write_cam};
pub use config::{apply_setting, parse_config, read_config, CONFIG_KEYS};
pub use image_io::{read_image, write_image_gray16};
pub use pfm::{read_pfm, read_pfm_grid, write_pfm, write_pfm_grid};
pub use ply::{read_ply, write_ply_cloud, write_ply_mesh, PlyData, PlyFormat};
pub use scene::{
    cam_path, depth_path, image_path, load_scene, parse_pairs, read_pairs, write_pairs, write_scene, PairList,
    SceneBundle,
};
pub use volume::{read_volume, write_volume};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
