use crate::fusion::DepthMap;
use crate::geometry::CameraParams;

use super::Triangle;

/// Edges longer than this many pixel footprints (at the local depth) are
/// treated as spanning a depth discontinuity.
pub const DEFAULT_DISC_RATIO: f64 = 3.0;

/// Two triangles per pixel quad of back-projected points.
///
/// Quads touching an invalid pixel are skipped, as is any triangle with an
/// edge longer than `disc_ratio * mean_depth / focal`.
pub fn triangulate_depth_map(depth: &DepthMap, cam: &CameraParams, disc_ratio: f64) -> Vec<Triangle> {
    let (w, h) = (depth.width(), depth.height());
    let footprint = 1.0 / cam.focal();
    let mut out = Vec::new();
    if w < 2 || h < 2 {
        return out;
    }
    let corner = |u: usize, v: usize| depth.value(u, v).map(|d| (cam.back_project_unchecked(u as f64, v as f64, d), d));
    for v in 0..h - 1 {
        for u in 0..w - 1 {
            let (Some(p00), Some(p10), Some(p01), Some(p11)) =
                (corner(u, v), corner(u + 1, v), corner(u, v + 1), corner(u + 1, v + 1))
            else {
                continue;
            };
            for [a, b, c] in [[p00, p10, p01], [p10, p11, p01]] {
                let local = (a.1 + b.1 + c.1) / 3.0;
                let limit = disc_ratio * local * footprint;
                let long = [(a.0, b.0), (b.0, c.0), (c.0, a.0)].iter().any(|(x, y)| (x - y).norm() > limit);
                if long {
                    continue;
                }
                if let Ok(t) = Triangle::new(a.0, b.0, c.0) {
                    out.push(t);
                }
            }
        }
    }
    out
}
