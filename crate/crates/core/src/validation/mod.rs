//! Error-bound analysis on triangulated surfaces, point-cloud metrics and the
//! synthetic scenes used as ground truth throughout the test suites.

mod metrics;
mod synthetic;
mod triangle;
mod triangulate;

pub use metrics::{evaluate_point_clouds, EvalReport};
pub use synthetic::{render_synthetic_scene, Primitive, SceneKind, SceneSpec, SyntheticScene};
pub use triangle::{
    bound_check, point_triangle_distance, BoundEntry, BoundReport, ClosestFeature, Triangle, TriangleDistance,
};
pub use triangulate::{triangulate_depth_map, DEFAULT_DISC_RATIO};
