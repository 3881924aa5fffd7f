//! Multi-view consistency filtering, point-cloud fusion and mesh extraction
//! from the reference-view distance volume.

mod consistency;
mod marching_cubes;
mod sdf_grid;

pub use consistency::{cross_view_filter, fuse_point_cloud, FilterConfig, PixelRef, PointCloud};
pub use marching_cubes::{marching_cubes, TriangleMesh};
pub use sdf_grid::{sdf_grid_from_volume, GridConfig, VoxelSDF};
