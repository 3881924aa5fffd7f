//! Region-aware multi-view stereo: cascade plane-sweep cost volumes, paired
//! probability and signed-distance volumes, two-branch depth fusion, point
//! cloud and mesh reconstruction, plus the validation tooling around them.

// Negated float comparisons like `!(x > 0.0)` are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost_volume;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod pipeline;
pub mod reconstruct;
pub mod region_heads;
pub mod sdf_supervision;
pub mod validation;

pub use cost_volume::{
    aggregate_cost, build_feature_volume, compute_view_weights, extract_features, CostVolume, FeatureMap,
    FeatureVolume, ViewWeightMap, WeightMode,
};
pub use error::{Error, Result};
pub use fusion::{confidence_map, fuse_branches, softargmax_depth, ConfidenceMap, DepthMap, FusionConfig};
pub use geometry::{
    back_project, project, sample_hypotheses, warp_pixel, CameraParams, DepthRange, HypothesisSet, PixelCoord, Point3,
    StageSpec, Warper,
};
pub use grid::{Grid, Image, Volume};
pub use pipeline::{estimate_depth, DepthEstimate, PipelineConfig, StageConfig, StageOutput};
pub use reconstruct::{
    cross_view_filter, fuse_point_cloud, marching_cubes, sdf_grid_from_volume, FilterConfig, GridConfig, PointCloud,
    TriangleMesh, VoxelSDF,
};
pub use region_heads::{distance_from_provisional, probability_from_cost, DistanceVolume, ProbabilityVolume};
pub use sdf_supervision::{
    generate_sdf_gt, losses, nearest_global, nearest_in_patch, surface_points_from_depth, LossReport, SearchConfig,
    SignedDistanceGT, StageTargets, SurfacePointSet,
};
pub use validation::{
    bound_check, evaluate_point_clouds, point_triangle_distance, render_synthetic_scene, triangulate_depth_map,
    BoundReport, EvalReport, SceneKind, SceneSpec, SyntheticScene, Triangle,
};
