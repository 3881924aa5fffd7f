//! Shared fixtures for the benchmarks.

use mvsdf::cost_volume::reference_volume;
use mvsdf::*;
use nalgebra::{Matrix3, Vector3};

/// Identity camera centred on a `side x side` image.
pub fn square_camera(side: usize) -> CameraParams {
    let c = (side as f64 - 1.0) / 2.0;
    CameraParams::pinhole(side as f64, c, c, Matrix3::identity(), Vector3::zeros(), 1.0, 0.1).unwrap()
}

/// Gently undulating depth map around depth 10.
pub fn wavy_depth(side: usize) -> DepthMap {
    let s = side as f64;
    let values = (0..side * side)
        .map(|i| {
            let (u, v) = ((i % side) as f64 / s, (i / side) as f64 / s);
            10.0 + 0.4 * (7.0 * u).sin() + 0.3 * (5.0 * v + 1.0).cos()
        })
        .collect();
    DepthMap::from_values(side, side, values)
}

/// Back-projected query points one interval off the surface, with their pixels.
pub fn queries(depth: &DepthMap, cam: &CameraParams, n: usize) -> Vec<(Point3, (usize, usize))> {
    let (w, h) = (depth.width(), depth.height());
    (0..n)
        .map(|i| {
            // low-discrepancy walk over the image
            let u = (i * 7919) % w;
            let v = (i * 104_729 / w + i) % h;
            let z = depth.value(u, v).unwrap() + if i % 2 == 0 { 0.1 } else { -0.1 };
            (back_project(PixelCoord::new(u as f64, v as f64), z, cam).unwrap(), (u, v))
        })
        .collect()
}

/// Reference and warped source feature volumes of the first cascade stage.
pub struct SweepInputs {
    pub reference: FeatureVolume,
    pub sources: Vec<FeatureVolume>,
}

pub fn sweep_inputs(width: usize, height: usize) -> SweepInputs {
    let scene = render_synthetic_scene(&SceneSpec::new(SceneKind::SpherePlane).with_size(width, height)).unwrap();
    let cfg = PipelineConfig::default();
    let cam0 = &scene.cameras[0];
    let spec = cfg.stage_spec(0, cam0);
    let feat = extract_features(&scene.images[0], spec.divisor).unwrap();
    let hyps = sample_hypotheses(&spec, cfg.global_range(cam0), None, feat.width(), feat.height()).unwrap();
    let cam_ref = cam0.scaled(spec.divisor);
    let sources = scene.pairs[0]
        .iter()
        .map(|&s| {
            let f = extract_features(&scene.images[s], spec.divisor).unwrap();
            build_feature_volume(&f, &cam_ref, &scene.cameras[s].scaled(spec.divisor), &hyps)
        })
        .collect();
    SweepInputs { reference: reference_volume(&feat, hyps.count()), sources }
}

/// Exact sphere distance on a cubic grid of `n` voxels per side.
pub fn sphere_grid(n: usize) -> VoxelSDF {
    let spacing = 2.4 / n as f64;
    let cfg = GridConfig { origin: Vector3::repeat(-1.2 + 0.5 * spacing), spacing, dims: [n, n, n] };
    VoxelSDF::from_fn(&cfg, |p| Some(p.norm() - 1.0)).unwrap()
}
