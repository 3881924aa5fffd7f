use mvsdf::io::{self, PlyFormat};
use mvsdf::*;

fn small(kind: SceneKind) -> SyntheticScene {
    render_synthetic_scene(&SceneSpec::new(kind).with_size(160, 128)).unwrap()
}

fn within(est: &DepthMap, gt: &DepthMap, tol: f64) -> f64 {
    let (mut n, mut ok) = (0, 0);
    for v in 0..gt.height() {
        for u in 0..gt.width() {
            if let Some(g) = gt.value(u, v) {
                n += 1;
                ok += est.value(u, v).is_some_and(|e| (e - g).abs() < tol) as usize;
            }
        }
    }
    ok as f64 / n as f64
}

#[test]
fn fronto_plane_is_recovered() {
    let scene = small(SceneKind::FrontoPlane);
    let est = estimate_depth(&scene.images, &scene.cameras, 0, &scene.pairs[0], &PipelineConfig::default()).unwrap();
    let frac = within(&est.depth, &scene.depths[0], scene.spec.depth_interval);
    assert!(frac > 0.95, "only {frac} within one interval");
    assert_eq!(est.stages.len(), 3);
    assert_eq!((est.stages[0].depth.width(), est.stages[0].depth.height()), (40, 32));
    assert!(est.confidence.data.as_slice().iter().all(|c| (0.0..=1.0 + 1e-12).contains(c)));
}

#[test]
fn later_stages_sharpen_the_estimate() {
    let scene = small(SceneKind::SlantedPlane);
    let cfg = PipelineConfig::default();
    let est = estimate_depth(&scene.images, &scene.cameras, 0, &scene.pairs[0], &cfg).unwrap();
    let gt = &scene.depths[0];
    let err = |s: &StageOutput, divisor: usize| {
        let g = gt.downsample(divisor);
        let mut e = vec![];
        for v in 0..g.height() {
            for u in 0..g.width() {
                if let (Some(a), Some(b)) = (g.value(u, v), s.depth.value(u, v)) {
                    e.push((a - b).abs());
                }
            }
        }
        e.sort_by(f64::total_cmp);
        e[e.len() / 2]
    };
    let medians: Vec<f64> = est.stages.iter().zip(&cfg.stages).map(|(s, c)| err(s, c.divisor)).collect();
    assert!(medians[2] < medians[0], "{medians:?}");
    assert!(medians[2] < scene.spec.depth_interval);
}

#[test]
fn invalid_requests_are_rejected() {
    let scene = small(SceneKind::FrontoPlane);
    let cfg = PipelineConfig::default();
    assert!(matches!(estimate_depth(&scene.images, &scene.cameras, 0, &[0, 1], &cfg), Err(Error::InvalidInput(_))));
    assert!(matches!(estimate_depth(&scene.images, &scene.cameras, 0, &[], &cfg), Err(Error::InsufficientViews(_))));
    let mut bad = cfg.clone();
    bad.patch_k = 4;
    assert!(estimate_depth(&scene.images, &scene.cameras, 0, &scene.pairs[0], &bad).is_err());
}

#[test]
fn sdf_ground_truth_on_fronto_plane() {
    let scene = small(SceneKind::FrontoPlane);
    let cam = &scene.cameras[0];
    let gt = &scene.depths[0];
    let (cu, cv) = (80, 64);
    let z0 = gt.value(cu, cv).unwrap();
    let depths: Vec<f64> = (0..9).map(|i| z0 - 0.4 + 0.1 * i as f64).collect();
    let hyps = HypothesisSet::global(depths.clone(), gt.width(), gt.height()).unwrap();
    let sdf = generate_sdf_gt(&hyps, gt, cam, &SearchConfig::new(5).unwrap()).unwrap();
    for (k, d) in depths.iter().enumerate() {
        assert!(*sdf.valid.get(k, cv, cu));
        // near the principal point the closest surface sample is straight ahead
        assert!((sdf.data.get(k, cv, cu) - (z0 - d)).abs() < 1e-3, "slice {k}");
    }
}

#[test]
fn step_scene_cloud_and_files() {
    let scene = small(SceneKind::StepEdge);
    let cfg = PipelineConfig::default();
    let ests: Vec<DepthEstimate> = (0..scene.cameras.len())
        .map(|r| estimate_depth(&scene.images, &scene.cameras, r, &scene.pairs[r], &cfg).unwrap())
        .collect();
    let depths: Vec<DepthMap> = ests.iter().map(|e| e.depth.clone()).collect();
    let confs: Vec<ConfidenceMap> = ests.iter().map(|e| e.confidence.clone()).collect();
    let masks = cross_view_filter(&depths, &confs, &scene.cameras, &cfg.filter).unwrap();
    let cloud = fuse_point_cloud(&depths, &masks, Some(&scene.images), &scene.cameras, &cfg.filter).unwrap();
    assert!(cloud.len() > 1000);
    // fused points lie close to one of the two planes
    let off: Vec<f64> = cloud.points.iter().map(|p| scene.surface_distance(p)).collect();
    let mean = off.iter().sum::<f64>() / off.len() as f64;
    assert!(mean < scene.spec.depth_interval, "mean surface distance {mean}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cloud.ply");
    io::write_ply_cloud(&path, &cloud, PlyFormat::BinaryLittleEndian).unwrap();
    let back = io::read_ply(&path).unwrap();
    assert_eq!(back.vertices.len(), cloud.len());
    assert_eq!(back.colors.as_ref(), cloud.colors.as_ref());
}
