use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fusion::{ConfidenceMap, DepthMap};
use crate::geometry::{CameraParams, Point3};
use crate::grid::{bilinear, Grid, Image};

/// Thresholds for the geometric consistency check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    /// Maximum round-trip reprojection error in pixels.
    pub eps_px: f64,
    /// Maximum relative round-trip depth error.
    pub eps_rel: f64,
    /// Number of other views that must agree; clamped to the views available.
    pub min_views: usize,
    pub min_conf: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { eps_px: 1.0, eps_rel: 0.01, min_views: 3, min_conf: 0.3 }
    }
}

impl FilterConfig {
    fn validate(&self) -> Result<()> {
        if !(self.eps_px > 0.0 && self.eps_rel > 0.0) || !self.min_conf.is_finite() {
            return Err(Error::InvalidInput("consistency thresholds must be positive".into()));
        }
        Ok(())
    }
}

/// A pixel of one view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PixelRef {
    pub view: usize,
    pub u: usize,
    pub v: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub colors: Option<Vec<[u8; 3]>>,
    /// Pixels merged into each point.
    pub sources: Vec<Vec<PixelRef>>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Point3>) -> Self {
        let sources = vec![Vec::new(); points.len()];
        Self { points, colors: None, sources }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Pulls coordinates that overshoot the image border by rounding error back onto it.
fn snap_to_border(mut q: nalgebra::Vector3<f64>, grid: &Grid<f64>) -> nalgebra::Vector3<f64> {
    const TOL: f64 = 1e-6;
    let (xmax, ymax) = ((grid.width() - 1) as f64, (grid.height() - 1) as f64);
    for (c, hi) in [(0, xmax), (1, ymax)] {
        if q[c] < 0.0 && q[c] > -TOL {
            q[c] = 0.0;
        } else if q[c] > hi && q[c] < hi + TOL {
            q[c] = hi;
        }
    }
    q
}

/// Round trip `(u, v, d)` of view `i` through view `j`.
///
/// Returns the continuous pixel in `j` when the reprojection lands within the
/// thresholds.
fn round_trip(
    cams: &[CameraParams],
    nan_filled: &[Grid<f64>],
    cfg: &FilterConfig,
    (i, u, v, d): (usize, usize, usize, f64),
    j: usize,
) -> Option<(f64, f64)> {
    let x = cams[i].back_project_unchecked(u as f64, v as f64, d);
    let xj = cams[j].to_camera(&x);
    if !(xj.z > 0.0) {
        return None;
    }
    let qj = snap_to_border(cams[j].intrinsics() * (xj / xj.z), &nan_filled[j]);
    let dj = bilinear(&nan_filled[j], qj.x, qj.y)?;
    if !dj.is_finite() || !(dj > 0.0) {
        return None;
    }
    let back = cams[j].back_project_unchecked(qj.x, qj.y, dj);
    let xi = cams[i].to_camera(&back);
    if !(xi.z > 0.0) {
        return None;
    }
    let pi = cams[i].intrinsics() * (xi / xi.z);
    let err_px = ((pi.x - u as f64).powi(2) + (pi.y - v as f64).powi(2)).sqrt();
    let err_rel = (xi.z - d).abs() / d;
    (err_px < cfg.eps_px && err_rel < cfg.eps_rel).then_some((qj.x, qj.y))
}

fn check_inputs(depths: &[DepthMap], cams: &[CameraParams]) -> Result<()> {
    if depths.len() < 2 {
        return Err(Error::InsufficientViews(depths.len()));
    }
    if cams.len() != depths.len() {
        return Err(Error::InvalidInput(format!("{} depth maps but {} cameras", depths.len(), cams.len())));
    }
    Ok(())
}

/// Per-view masks of pixels that are confident and geometrically consistent
/// with at least `min(min_views, N - 1)` other views.
///
/// Other views' depths are sampled bilinearly and need all four taps valid.
pub fn cross_view_filter(
    depths: &[DepthMap],
    confidences: &[ConfidenceMap],
    cams: &[CameraParams],
    cfg: &FilterConfig,
) -> Result<Vec<Grid<bool>>> {
    check_inputs(depths, cams)?;
    cfg.validate()?;
    if confidences.len() != depths.len() {
        return Err(Error::InvalidInput("one confidence map per view is required".into()));
    }
    for (d, c) in depths.iter().zip(confidences) {
        if !d.data().same_shape(&c.data) {
            return Err(Error::InvalidInput("confidence and depth shapes differ".into()));
        }
    }
    let required = cfg.min_views.min(depths.len() - 1);
    let nan_filled: Vec<Grid<f64>> = depths.iter().map(|d| d.to_nan_filled()).collect();
    Ok((0..depths.len())
        .into_par_iter()
        .map(|i| {
            let dm = &depths[i];
            Grid::from_fn(dm.width(), dm.height(), |u, v| {
                let Some(d) = dm.value(u, v) else { return false };
                if !(*confidences[i].data.get(u, v) >= cfg.min_conf) {
                    return false;
                }
                let agree = (0..depths.len())
                    .filter(|&j| j != i)
                    .filter(|&j| round_trip(cams, &nan_filled, cfg, (i, u, v, d), j).is_some())
                    .count();
                agree >= required
            })
        })
        .collect())
}

/// Merges kept pixels into points.
///
/// Views are visited in order and pixels in row-major order; each unused kept
/// pixel seeds a point and absorbs, from every other view, the consistent kept
/// pixel nearest to its reprojection if that pixel is still unused. The point
/// is the mean of the absorbed back-projections and colors.
pub fn fuse_point_cloud(
    depths: &[DepthMap],
    masks: &[Grid<bool>],
    images: Option<&[Image]>,
    cams: &[CameraParams],
    cfg: &FilterConfig,
) -> Result<PointCloud> {
    if depths.is_empty() || cams.len() != depths.len() || masks.len() != depths.len() {
        return Err(Error::InvalidInput("depths, masks and cameras must be non-empty and aligned".into()));
    }
    cfg.validate()?;
    if let Some(imgs) = images {
        let aligned = imgs.len() == depths.len()
            && imgs.iter().zip(depths).all(|(im, d)| im.width == d.width() && im.height == d.height());
        if !aligned {
            return Err(Error::InvalidInput("images must match the depth maps".into()));
        }
    }
    let nan_filled: Vec<Grid<f64>> = depths.iter().map(|d| d.to_nan_filled()).collect();
    let mut used: Vec<Grid<bool>> = depths.iter().map(|d| Grid::filled(d.width(), d.height(), false)).collect();
    let mut cloud = PointCloud { colors: images.map(|_| Vec::new()), ..Default::default() };

    for i in 0..depths.len() {
        for v in 0..depths[i].height() {
            for u in 0..depths[i].width() {
                if !*masks[i].get(u, v) || *used[i].get(u, v) {
                    continue;
                }
                let Some(d) = depths[i].value(u, v) else { continue };
                let mut members = vec![PixelRef { view: i, u, v }];
                used[i].set(u, v, true);
                for j in (0..depths.len()).filter(|&j| j != i) {
                    let Some((qx, qy)) = round_trip(cams, &nan_filled, cfg, (i, u, v, d), j) else {
                        continue;
                    };
                    let (ru, rv) = (qx.round(), qy.round());
                    if ru < 0.0 || rv < 0.0 || ru >= depths[j].width() as f64 || rv >= depths[j].height() as f64 {
                        continue;
                    }
                    let (ru, rv) = (ru as usize, rv as usize);
                    if *masks[j].get(ru, rv) && !*used[j].get(ru, rv) && depths[j].value(ru, rv).is_some() {
                        used[j].set(ru, rv, true);
                        members.push(PixelRef { view: j, u: ru, v: rv });
                    }
                }
                let n = members.len() as f64;
                let mut sum = Point3::zeros();
                let mut color = [0.0f64; 3];
                for m in &members {
                    let dm = depths[m.view].value(m.u, m.v).expect("member depth is valid");
                    sum += cams[m.view].back_project_unchecked(m.u as f64, m.v as f64, dm);
                    if let Some(imgs) = images {
                        let c = imgs[m.view].color_u8(m.u, m.v);
                        for k in 0..3 {
                            color[k] += c[k] as f64;
                        }
                    }
                }
                cloud.points.push(sum / n);
                if let Some(colors) = cloud.colors.as_mut() {
                    colors.push(color.map(|c| (c / n).round() as u8));
                }
                cloud.sources.push(members);
            }
        }
    }
    Ok(cloud)
}
