//! Ground-truth signed distances for hypothesis points and the two-branch
//! training loss.
//!
//! Each query is the back-projection of a pixel at a hypothesis depth. Its
//! magnitude is the distance to the nearest back-projected ground-truth point,
//! searched only in the `k x k` pixel window around the query's own pixel, so
//! the cost per query is `O(k^2)` regardless of the map resolution. The sign is
//! positive in front of the surface (hypothesis nearer than the ground-truth
//! depth at that pixel) and negative behind it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fusion::DepthMap;
use crate::geometry::{CameraParams, HypothesisSet, Point3};
use crate::grid::{Grid, Volume};
use crate::region_heads::DistanceVolume;

/// Back-projected depth map: one 3D point per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePointSet {
    pub points: Grid<Point3>,
    pub valid: Grid<bool>,
}

impl SurfacePointSet {
    pub fn width(&self) -> usize {
        self.points.width()
    }

    pub fn height(&self) -> usize {
        self.points.height()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.as_slice().iter().filter(|&&b| b).count()
    }
}

/// Patch side length for the local search; odd and at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    patch_k: usize,
}

impl SearchConfig {
    pub const DEFAULT_K: usize = 5;

    pub fn new(patch_k: usize) -> Result<Self> {
        if patch_k == 0 || patch_k.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!("patch size must be odd and >= 1, got {patch_k}")));
        }
        Ok(Self { patch_k })
    }

    pub fn patch_k(&self) -> usize {
        self.patch_k
    }

    pub fn radius(&self) -> usize {
        self.patch_k / 2
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { patch_k: Self::DEFAULT_K }
    }
}

/// Nearest surface point: Euclidean distance and its pixel `(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest {
    pub distance: f64,
    pub pixel: (usize, usize),
}

pub fn surface_points_from_depth(depth_gt: &DepthMap, cam: &CameraParams) -> SurfacePointSet {
    let (w, h) = (depth_gt.width(), depth_gt.height());
    let mut valid = Grid::filled(w, h, false);
    let points = Grid::from_fn(w, h, |u, v| match depth_gt.value(u, v) {
        Some(d) if d > 0.0 && d.is_finite() => {
            valid.set(u, v, true);
            cam.back_project_unchecked(u as f64, v as f64, d)
        }
        _ => Point3::new(f64::NAN, f64::NAN, f64::NAN),
    });
    SurfacePointSet { points, valid }
}

#[inline]
fn dist2(a: &Point3, b: &Point3) -> f64 {
    let d = a - b;
    d.x * d.x + d.y * d.y + d.z * d.z
}

/// Exhaustive nearest neighbor over every valid point. Ties go to the
/// smallest row-major pixel index.
pub fn nearest_global(q: &Point3, surf: &SurfacePointSet) -> Result<Nearest> {
    let w = surf.width();
    let mut best: Option<(f64, usize)> = None;
    for (i, (p, &ok)) in surf.points.as_slice().iter().zip(surf.valid.as_slice()).enumerate() {
        if !ok {
            continue;
        }
        let d = dist2(q, p);
        if best.is_none_or(|(b, _)| d < b) {
            best = Some((d, i));
        }
    }
    best.map(|(d, i)| Nearest { distance: d.sqrt(), pixel: (i % w, i / w) }).ok_or(Error::EmptySurface)
}

/// Window search without argument checks; `None` when the window holds no
/// valid point.
#[inline]
pub(crate) fn patch_search(q: &Point3, u: usize, v: usize, surf: &SurfacePointSet, radius: usize) -> Option<Nearest> {
    let u0 = u.saturating_sub(radius);
    let v0 = v.saturating_sub(radius);
    let u1 = (u + radius).min(surf.width() - 1);
    let v1 = (v + radius).min(surf.height() - 1);
    let mut best: Option<(f64, usize, usize)> = None;
    for vv in v0..=v1 {
        for uu in u0..=u1 {
            if !*surf.valid.get(uu, vv) {
                continue;
            }
            let d = dist2(q, surf.points.get(uu, vv));
            if best.is_none_or(|(b, _, _)| d < b) {
                best = Some((d, uu, vv));
            }
        }
    }
    best.map(|(d, uu, vv)| Nearest { distance: d.sqrt(), pixel: (uu, vv) })
}

/// Nearest neighbor restricted to the `k x k` window centered on `anchor`,
/// clipped at the image border. `Ok(None)` signals an empty patch.
pub fn nearest_in_patch(
    q: &Point3,
    anchor: (usize, usize),
    surf: &SurfacePointSet,
    cfg: &SearchConfig,
) -> Result<Option<Nearest>> {
    if anchor.0 >= surf.width() || anchor.1 >= surf.height() {
        return Err(Error::InvalidInput(format!(
            "anchor ({}, {}) outside {}x{} surface",
            anchor.0,
            anchor.1,
            surf.width(),
            surf.height()
        )));
    }
    Ok(patch_search(q, anchor.0, anchor.1, surf, cfg.radius()))
}

/// Signed distances (world units) for every `(hypothesis, pixel)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedDistanceGT {
    pub data: Volume<f64>,
    pub valid: Volume<bool>,
}

impl SignedDistanceGT {
    #[inline]
    pub fn value(&self, d: usize, v: usize, u: usize) -> Option<f64> {
        if *self.valid.get(d, v, u) {
            Some(*self.data.get(d, v, u))
        } else {
            None
        }
    }
}

pub fn generate_sdf_gt(
    hyps: &HypothesisSet,
    depth_gt: &DepthMap,
    cam: &CameraParams,
    cfg: &SearchConfig,
) -> Result<SignedDistanceGT> {
    if (hyps.width(), hyps.height()) != (depth_gt.width(), depth_gt.height()) {
        return Err(Error::InvalidInput(format!(
            "hypotheses are {}x{} but depth map is {}x{}",
            hyps.width(),
            hyps.height(),
            depth_gt.width(),
            depth_gt.height()
        )));
    }
    let surf = surface_points_from_depth(depth_gt, cam);
    let (w, h, dcount) = (hyps.width(), hyps.height(), hyps.count());
    let radius = cfg.radius();
    let mut data = vec![f64::NAN; dcount * h * w];
    let mut valid = vec![false; dcount * h * w];
    data.par_chunks_mut(h * w).zip(valid.par_chunks_mut(h * w)).enumerate().for_each(|(d, (out, ok))| {
        for v in 0..h {
            for u in 0..w {
                if !*surf.valid.get(u, v) {
                    continue;
                }
                let gt = *depth_gt.data().get(u, v);
                let z = hyps.depth(d, u, v);
                let q = cam.back_project_unchecked(u as f64, v as f64, z);
                if let Some(n) = patch_search(&q, u, v, &surf, radius) {
                    let sign = if z < gt {
                        1.0
                    } else if z > gt {
                        -1.0
                    } else {
                        0.0
                    };
                    out[v * w + u] = sign * n.distance;
                    ok[v * w + u] = true;
                }
            }
        }
    });
    Ok(SignedDistanceGT { data: Volume::from_vec(dcount, h, w, data), valid: Volume::from_vec(dcount, h, w, valid) })
}

/// Predictions and targets for one cascade stage.
#[derive(Debug, Clone, Copy)]
pub struct StageTargets<'a> {
    pub depth_pred: &'a DepthMap,
    pub depth_gt: &'a DepthMap,
    pub dist_pred: &'a DistanceVolume,
    pub dist_gt: &'a SignedDistanceGT,
    /// Optional pixel mask intersected with ground-truth validity.
    pub mask: Option<&'a Grid<bool>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub depth_per_stage: Vec<f64>,
    pub sdf_per_stage: Vec<f64>,
    pub l_depth: f64,
    pub l_sdf: f64,
    pub total: f64,
    pub lambda: f64,
    /// Stages whose mask selected no pixel (they contribute 0).
    pub empty_stages: Vec<usize>,
}

pub const DEFAULT_LAMBDA: f64 = 0.1;

/// Mean absolute depth error plus `lambda` times the mean absolute error of
/// `S` against the ground truth mapped through the same `tanh(x / scale)`.
pub fn losses(stages: &[StageTargets<'_>], lambda: f64) -> Result<LossReport> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be >= 0, got {lambda}")));
    }
    let mut report = LossReport {
        depth_per_stage: Vec::with_capacity(stages.len()),
        sdf_per_stage: Vec::with_capacity(stages.len()),
        l_depth: 0.0,
        l_sdf: 0.0,
        total: 0.0,
        lambda,
        empty_stages: Vec::new(),
    };
    for (i, st) in stages.iter().enumerate() {
        let (w, h) = (st.depth_gt.width(), st.depth_gt.height());
        let (dcount, vh, vw) = st.dist_pred.data.shape();
        if (st.depth_pred.width(), st.depth_pred.height()) != (w, h)
            || (vw, vh) != (w, h)
            || st.dist_gt.data.shape() != (dcount, h, w)
            || st.mask.is_some_and(|m| (m.width(), m.height()) != (w, h))
        {
            return Err(Error::InvalidInput(format!("stage {} shapes are inconsistent", i + 1)));
        }
        let selected = |u: usize, v: usize| st.mask.is_none_or(|m| *m.get(u, v));
        let mut sum_d = 0.0;
        let mut n_d = 0usize;
        let mut sum_s = 0.0;
        let mut n_s = 0usize;
        for v in 0..h {
            for u in 0..w {
                if !selected(u, v) {
                    continue;
                }
                if let (Some(gt), Some(pred)) = (st.depth_gt.value(u, v), st.depth_pred.value(u, v)) {
                    sum_d += (gt - pred).abs();
                    n_d += 1;
                }
                for d in 0..dcount {
                    if let Some(sd) = st.dist_gt.value(d, v, u) {
                        let target = (sd / st.dist_pred.scale).tanh();
                        sum_s += (target - st.dist_pred.data.get(d, v, u)).abs();
                        n_s += 1;
                    }
                }
            }
        }
        let ld = if n_d > 0 { sum_d / n_d as f64 } else { 0.0 };
        let ls = if n_s > 0 { sum_s / n_s as f64 } else { 0.0 };
        if n_d == 0 && n_s == 0 {
            report.empty_stages.push(i);
        }
        report.depth_per_stage.push(ld);
        report.sdf_per_stage.push(ls);
        report.l_depth += ld;
        report.l_sdf += ls;
    }
    report.total = report.l_depth + lambda * report.l_sdf;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_cam() -> CameraParams {
        CameraParams::new(Matrix3::identity(), Matrix3::identity(), Vector3::zeros(), 1.0, 1.0).unwrap()
    }

    fn dtu_like_cam(w: usize, h: usize) -> CameraParams {
        CameraParams::pinhole(
            2.0 * w as f64,
            (w as f64 - 1.0) / 2.0,
            (h as f64 - 1.0) / 2.0,
            Matrix3::identity(),
            Vector3::zeros(),
            425.0,
            2.5,
        )
        .unwrap()
    }

    fn points(pts: &[(f64, f64, f64)], w: usize) -> SurfacePointSet {
        let h = pts.len() / w;
        SurfacePointSet {
            points: Grid::from_vec(w, h, pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect()),
            valid: Grid::filled(w, h, true),
        }
    }

    #[test]
    fn constant_depth_gives_plane() {
        let d = DepthMap::from_values(3, 2, vec![4.0; 6]);
        let s = surface_points_from_depth(&d, &identity_cam());
        for p in s.points.as_slice() {
            assert_eq!(p.z, 4.0);
        }
    }

    #[test]
    fn surface_points_reproject_to_their_pixels() {
        let cam = dtu_like_cam(16, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut vals: Vec<f64> = (0..192).map(|_| rng.gen_range(430.0..900.0)).collect();
        vals[5] = -1.0;
        vals[9] = f64::NAN;
        let s = surface_points_from_depth(&DepthMap::from_values(16, 12, vals.clone()), &cam);
        assert!(!*s.valid.get(5, 0) && !*s.valid.get(9, 0));
        for v in 0..12 {
            for u in 0..16 {
                if *s.valid.get(u, v) {
                    let (p, z) = crate::geometry::project(s.points.get(u, v), &cam).unwrap();
                    assert!((p.u - u as f64).abs() < 1e-6 && (p.v - v as f64).abs() < 1e-6);
                    assert!((z - vals[v * 16 + u]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn sphere_depth_points_lie_on_sphere() {
        let (w, h) = (32, 24);
        let cam = dtu_like_cam(w, h);
        let center = Vector3::new(0.0, 0.0, 600.0);
        let r = 150.0;
        // analytic ray-sphere intersection for the depth map
        let vals = (0..w * h)
            .map(|i| {
                let ray = cam.ray_camera((i % w) as f64, (i / w) as f64);
                let a = ray.dot(&ray);
                let b = -2.0 * ray.dot(&center);
                let c = center.dot(&center) - r * r;
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    f64::NAN
                } else {
                    (-b - disc.sqrt()) / (2.0 * a)
                }
            })
            .collect();
        let s = surface_points_from_depth(&DepthMap::from_values(w, h, vals), &cam);
        assert!(s.valid_count() > 100);
        for (p, &ok) in s.points.as_slice().iter().zip(s.valid.as_slice()) {
            if ok {
                assert!(((p - center).norm() - r).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn global_nearest_basics() {
        let s = points(&[(0.0, 0.0, 1.0), (2.0, 0.0, 1.0)], 2);
        let n = nearest_global(&Point3::new(2.0, 0.0, 1.0), &s).unwrap();
        assert_eq!((n.distance, n.pixel), (0.0, (1, 0)));
        let n = nearest_global(&Point3::new(1.0, 0.0, 1.0), &s).unwrap();
        assert_eq!(n.pixel, (0, 0), "tie goes to the lower row-major index");
        let mut empty = s.clone();
        empty.valid = Grid::filled(2, 1, false);
        assert!(matches!(nearest_global(&Point3::zeros(), &empty), Err(Error::EmptySurface)));
    }

    /// Second exhaustive implementation: sort all candidates.
    fn sorted_scan(q: &Point3, s: &SurfacePointSet) -> (f64, usize) {
        let mut c: Vec<(f64, usize)> = s
            .points
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(i, _)| s.valid.as_slice()[*i])
            .map(|(i, p)| ((q - p).norm_squared(), i))
            .collect();
        c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        (c[0].0.sqrt(), c[0].1)
    }

    #[test]
    fn global_matches_second_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<(f64, f64, f64)> = (0..1000).map(|_| (rng.gen(), rng.gen(), rng.gen())).collect();
        let s = points(&pts, 40);
        for _ in 0..200 {
            let q = Point3::new(rng.gen(), rng.gen(), rng.gen());
            let n = nearest_global(&q, &s).unwrap();
            let (d, i) = sorted_scan(&q, &s);
            assert_eq!(n.distance, d);
            assert_eq!(n.pixel, (i % 40, i / 40));
        }
    }

    #[test]
    fn patch_k1_is_anchor_point() {
        let s = points(&[(0.0, 0.0, 1.0), (0.1, 0.0, 1.0), (0.0, 0.1, 1.0), (5.0, 5.0, 5.0)], 2);
        let cfg = SearchConfig::new(1).unwrap();
        let q = Point3::new(0.0, 0.0, 1.0);
        let n = nearest_in_patch(&q, (1, 1), &s, &cfg).unwrap().unwrap();
        assert_eq!(n.pixel, (1, 1));
        assert!((n.distance - (25.0f64 + 25.0 + 16.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn corner_anchor_searches_clipped_window() {
        // 6x6 grid; only points outside the clipped 3x3 corner window are close to q
        let mut pts = Vec::new();
        for v in 0..6 {
            for u in 0..6 {
                pts.push((u as f64, v as f64, if u <= 2 && v <= 2 { 10.0 } else { 0.0 }));
            }
        }
        let s = points(&pts, 6);
        let q = Point3::new(0.0, 0.0, 0.0);
        let n = nearest_in_patch(&q, (0, 0), &s, &SearchConfig::default()).unwrap().unwrap();
        assert!(n.pixel.0 <= 2 && n.pixel.1 <= 2);
        assert_eq!(n.pixel, (0, 0));
        let g = nearest_global(&q, &s).unwrap();
        assert_eq!(g.pixel, (3, 0));
        assert!(n.distance > g.distance);
        assert!(nearest_in_patch(&q, (6, 0), &s, &SearchConfig::default()).is_err());
    }

    #[test]
    fn empty_patch_is_signalled() {
        let mut s = points(&[(0.0, 0.0, 1.0); 25], 5);
        s.valid = Grid::from_fn(5, 5, |u, _| u == 4);
        let cfg = SearchConfig::new(3).unwrap();
        assert_eq!(nearest_in_patch(&Point3::zeros(), (0, 0), &s, &cfg).unwrap(), None);
    }

    #[test]
    fn search_config_validation() {
        assert!(SearchConfig::new(4).is_err());
        assert!(SearchConfig::new(0).is_err());
        assert_eq!(SearchConfig::default().patch_k(), 5);
    }

    #[test]
    fn sdf_zero_at_gt_and_plane_shortcut() {
        let z0 = 10.0;
        let (w, h) = (9, 9);
        let cam = CameraParams::pinhole(4.0, 4.0, 4.0, Matrix3::identity(), Vector3::zeros(), 1.0, 1.0).unwrap();
        let gt = DepthMap::from_values(w, h, vec![z0; w * h]);
        let hyps = HypothesisSet::global(vec![8.0, 9.5, 10.0, 11.0, 12.5], w, h).unwrap();
        let sdf = generate_sdf_gt(&hyps, &gt, &cam, &SearchConfig::default()).unwrap();
        for (d, &z) in [8.0, 9.5, 10.0, 11.0, 12.5].iter().enumerate() {
            let val = sdf.value(d, 4, 4).unwrap();
            assert!((val - (z0 - z)).abs() < 1e-12, "central pixel: {val} vs {}", z0 - z);
        }
        assert_eq!(sdf.value(2, 0, 0), Some(0.0));
    }

    #[test]
    fn sign_is_antisymmetric() {
        let (w, h) = (7, 7);
        let cam = CameraParams::pinhole(5.0, 3.0, 3.0, Matrix3::identity(), Vector3::zeros(), 1.0, 1.0).unwrap();
        let gt = DepthMap::from_values(w, h, vec![10.0; w * h]);
        let hyps = HypothesisSet::global(vec![9.0, 11.0], w, h).unwrap();
        let sdf = generate_sdf_gt(&hyps, &gt, &cam, &SearchConfig::default()).unwrap();
        let a = sdf.value(0, 3, 3).unwrap();
        let b = sdf.value(1, 3, 3).unwrap();
        assert!(a > 0.0 && b < 0.0);
        assert!((a + b).abs() < 1e-12);
    }

    #[test]
    fn wide_patch_equals_global_search() {
        let (w, h, dn) = (8, 8, 16);
        let cam = dtu_like_cam(w, h);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let gt_vals: Vec<f64> = (0..w * h).map(|_| rng.gen_range(500.0..520.0)).collect();
        let gt = DepthMap::from_values(w, h, gt_vals);
        let hyps = HypothesisSet::global((0..dn).map(|i| 495.0 + 2.0 * i as f64).collect(), w, h).unwrap();
        let cfg = SearchConfig::new(2 * w.max(h) + 1).unwrap();
        let sdf = generate_sdf_gt(&hyps, &gt, &cam, &cfg).unwrap();
        let surf = surface_points_from_depth(&gt, &cam);
        for d in 0..dn {
            for v in 0..h {
                for u in 0..w {
                    let q = cam.back_project_unchecked(u as f64, v as f64, hyps.depth(d, u, v));
                    let g = nearest_global(&q, &surf).unwrap();
                    assert_eq!(sdf.value(d, v, u).unwrap().abs(), g.distance);
                }
            }
        }
    }

    #[test]
    fn invalid_gt_marks_cells_invalid() {
        let cam = identity_cam();
        let gt = DepthMap::from_values(2, 1, vec![f64::NAN, 3.0]);
        let hyps = HypothesisSet::global(vec![2.0, 4.0], 2, 1).unwrap();
        let sdf = generate_sdf_gt(&hyps, &gt, &cam, &SearchConfig::default()).unwrap();
        assert_eq!(sdf.value(0, 0, 0), None);
        assert!(sdf.value(0, 0, 1).is_some());
    }

    fn stage_fixture(err_d: f64, err_s: f64, scale: f64) -> (DepthMap, DepthMap, DistanceVolume, SignedDistanceGT) {
        let gt = DepthMap::from_values(3, 2, vec![5.0; 6]);
        let pred = DepthMap::from_values(3, 2, vec![5.0 + err_d; 6]);
        let sd = 0.3;
        let sgt = SignedDistanceGT { data: Volume::filled(2, 2, 3, sd), valid: Volume::filled(2, 2, 3, true) };
        let spred = DistanceVolume { data: Volume::filled(2, 2, 3, (sd / scale).tanh() + err_s), scale };
        (pred, gt, spred, sgt)
    }

    #[test]
    fn perfect_prediction_has_zero_loss() {
        let (p, g, s, sg) = stage_fixture(0.0, 0.0, 2.0);
        let st = StageTargets { depth_pred: &p, depth_gt: &g, dist_pred: &s, dist_gt: &sg, mask: None };
        let r = losses(&[st, st, st], DEFAULT_LAMBDA).unwrap();
        assert_eq!(r.total, 0.0);
        assert_eq!(r.l_depth, 0.0);
        assert!(r.l_sdf.abs() < 1e-15);
    }

    #[test]
    fn single_stage_uniform_errors() {
        let (a, b) = (0.75, 0.125);
        let (p, g, s, sg) = stage_fixture(a, b, 2.0);
        let st = StageTargets { depth_pred: &p, depth_gt: &g, dist_pred: &s, dist_gt: &sg, mask: None };
        let r = losses(&[st], 0.1).unwrap();
        assert!((r.l_depth - a).abs() < 1e-12);
        assert!((r.l_sdf - b).abs() < 1e-12);
        assert!((r.total - (a + 0.1 * b)).abs() < 1e-9);
    }

    #[test]
    fn empty_mask_contributes_zero() {
        let (p, g, s, sg) = stage_fixture(1.0, 0.5, 2.0);
        let mask = Grid::filled(3, 2, false);
        let st = StageTargets { depth_pred: &p, depth_gt: &g, dist_pred: &s, dist_gt: &sg, mask: Some(&mask) };
        let r = losses(&[st], 0.1).unwrap();
        assert_eq!(r.total, 0.0);
        assert_eq!(r.empty_stages, vec![0]);
    }
}
