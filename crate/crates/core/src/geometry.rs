//! Pinhole camera model, cross-view warping and depth hypothesis sampling.
//!
//! Conventions: right-handed camera frame looking down `+z`, pixel `(u, v)` is
//! `(column, row)` with integer coordinates at pixel centers, and the pose maps
//! world to camera: `X_cam = R * X_world + t`.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::fusion::DepthMap;
use crate::grid::Grid;

pub type Point3 = Vector3<f64>;

/// Optional trailing fields of the depth-range line in camera files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneHint {
    pub num_planes: f64,
    pub depth_max: f64,
}

/// Intrinsics, world-to-camera pose and the per-view depth sweep parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraParams {
    intrinsics: Matrix3<f64>,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    depth_min: f64,
    depth_interval: f64,
    plane_hint: Option<PlaneHint>,
    k_inv: Matrix3<f64>,
}

impl CameraParams {
    pub fn new(
        intrinsics: Matrix3<f64>,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        depth_min: f64,
        depth_interval: f64,
    ) -> Result<Self> {
        let finite = intrinsics.iter().all(|x| x.is_finite())
            && rotation.iter().all(|x| x.is_finite())
            && translation.iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::Domain("camera parameters must be finite".into()));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if ortho > 1e-9 {
            return Err(Error::InvalidInput(format!("rotation is not orthonormal (|R^T R - I| = {ortho:e})")));
        }
        if intrinsics[(1, 0)] != 0.0 || intrinsics[(2, 0)] != 0.0 || intrinsics[(2, 1)] != 0.0 {
            return Err(Error::InvalidInput("intrinsics must be upper-triangular".into()));
        }
        if !(intrinsics[(0, 0)] > 0.0 && intrinsics[(1, 1)] > 0.0 && intrinsics[(2, 2)] > 0.0) {
            return Err(Error::InvalidInput("intrinsics diagonal must be positive".into()));
        }
        if !(depth_min > 0.0 && depth_min.is_finite()) {
            return Err(Error::InvalidInput(format!("depth_min must be > 0, got {depth_min}")));
        }
        if !(depth_interval > 0.0 && depth_interval.is_finite()) {
            return Err(Error::InvalidInput(format!("depth_interval must be > 0, got {depth_interval}")));
        }
        let k_inv = intrinsics.try_inverse().ok_or_else(|| Error::InvalidInput("singular intrinsics".into()))?;
        Ok(Self { intrinsics, rotation, translation, depth_min, depth_interval, plane_hint: None, k_inv })
    }

    /// Simple pinhole with square pixels and zero skew.
    pub fn pinhole(
        focal: f64,
        cx: f64,
        cy: f64,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        depth_min: f64,
        depth_interval: f64,
    ) -> Result<Self> {
        let k = Matrix3::new(focal, 0.0, cx, 0.0, focal, cy, 0.0, 0.0, 1.0);
        Self::new(k, rotation, translation, depth_min, depth_interval)
    }

    /// Camera centered at `eye` looking at `target`, image rows growing along `down`.
    pub fn look_at(
        intrinsics: Matrix3<f64>,
        eye: Point3,
        target: Point3,
        down: Vector3<f64>,
        depth_min: f64,
        depth_interval: f64,
    ) -> Result<Self> {
        let z = (target - eye).normalize();
        let x = down.cross(&z).normalize();
        let y = z.cross(&x);
        let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let translation = -(rotation * eye);
        Self::new(intrinsics, rotation, translation, depth_min, depth_interval)
    }

    pub fn with_plane_hint(mut self, hint: Option<PlaneHint>) -> Self {
        self.plane_hint = hint;
        self
    }

    pub fn intrinsics(&self) -> &Matrix3<f64> {
        &self.intrinsics
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn depth_min(&self) -> f64 {
        self.depth_min
    }

    pub fn depth_interval(&self) -> f64 {
        self.depth_interval
    }

    pub fn plane_hint(&self) -> Option<PlaneHint> {
        self.plane_hint
    }

    /// Mean focal length in pixels.
    pub fn focal(&self) -> f64 {
        0.5 * (self.intrinsics[(0, 0)] + self.intrinsics[(1, 1)])
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Point3 {
        -(self.rotation.transpose() * self.translation)
    }

    /// Intrinsics for an image area-downsampled by `divisor`.
    ///
    /// A coarse pixel center `U` covers fine pixels `divisor*U .. divisor*U + divisor - 1`.
    pub fn scaled(&self, divisor: usize) -> CameraParams {
        if divisor == 1 {
            return self.clone();
        }
        let s = divisor as f64;
        let off = (s - 1.0) / 2.0;
        let k = &self.intrinsics;
        let scaled = Matrix3::new(
            k[(0, 0)] / s,
            k[(0, 1)] / s,
            (k[(0, 2)] - off) / s,
            0.0,
            k[(1, 1)] / s,
            (k[(1, 2)] - off) / s,
            0.0,
            0.0,
            1.0,
        );
        let mut out = self.clone();
        out.intrinsics = scaled;
        out.k_inv = scaled.try_inverse().expect("scaled intrinsics stay invertible");
        out
    }

    /// Unit-depth ray direction (camera frame, `z = 1`) through pixel `(u, v)`.
    #[inline]
    pub fn ray_camera(&self, u: f64, v: f64) -> Vector3<f64> {
        self.k_inv * Vector3::new(u, v, 1.0)
    }

    #[inline]
    pub(crate) fn back_project_unchecked(&self, u: f64, v: f64, d: f64) -> Point3 {
        let xc = self.ray_camera(u, v) * d;
        self.rotation.transpose() * (xc - self.translation)
    }

    /// World point to camera frame.
    #[inline]
    pub fn to_camera(&self, x: &Point3) -> Vector3<f64> {
        self.rotation * x + self.translation
    }
}

/// Continuous pixel coordinate; `u` is the column, `v` the row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

impl PixelCoord {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    /// Whether the coordinate lies on the pixel-center lattice of a `width x height` image.
    pub fn inside(&self, width: usize, height: usize) -> bool {
        self.u >= 0.0 && self.v >= 0.0 && self.u <= (width - 1) as f64 && self.v <= (height - 1) as f64
    }
}

pub fn back_project(p: PixelCoord, d: f64, cam: &CameraParams) -> Result<Point3> {
    if !p.is_finite() || !d.is_finite() {
        return Err(Error::Domain(format!("non-finite back-projection input ({}, {}, {d})", p.u, p.v)));
    }
    if d <= 0.0 {
        return Err(Error::Domain(format!("depth must be > 0, got {d}")));
    }
    Ok(cam.back_project_unchecked(p.u, p.v, d))
}

/// Projects a world point, returning the pixel and its camera-frame depth.
pub fn project(x: &Point3, cam: &CameraParams) -> Result<(PixelCoord, f64)> {
    if !x.iter().all(|c| c.is_finite()) {
        return Err(Error::Domain("non-finite point".into()));
    }
    let xc = cam.to_camera(x);
    if xc.z <= 0.0 {
        return Err(Error::BehindCamera(xc.z));
    }
    let h = cam.intrinsics * xc;
    Ok((PixelCoord::new(h.x / h.z, h.y / h.z), xc.z))
}

/// Reprojects reference pixel `p` at depth `d` into the source view.
///
/// Fails with [`Error::BehindCamera`] when the point is not visible from the source.
pub fn warp_pixel(p: PixelCoord, d: f64, cam_ref: &CameraParams, cam_src: &CameraParams) -> Result<PixelCoord> {
    let x = back_project(p, d, cam_ref)?;
    project(&x, cam_src).map(|(q, _)| q)
}

/// Precomputed reference-to-source warp: `q ~ d * M [u v 1]^T + b`.
///
/// Algebraically identical to [`warp_pixel`]; used in the inner loops.
#[derive(Debug, Clone)]
pub struct Warper {
    m: Matrix3<f64>,
    b: Vector3<f64>,
}

impl Warper {
    pub fn new(cam_ref: &CameraParams, cam_src: &CameraParams) -> Self {
        let r_rel = cam_src.rotation * cam_ref.rotation.transpose();
        let t_rel = cam_src.translation - r_rel * cam_ref.translation;
        Self { m: cam_src.intrinsics * r_rel * cam_ref.k_inv, b: cam_src.intrinsics * t_rel }
    }

    /// `None` when the warped point is behind the source camera.
    #[inline]
    pub fn warp(&self, u: f64, v: f64, d: f64) -> Option<PixelCoord> {
        let h = self.m * Vector3::new(u, v, 1.0) * d + self.b;
        if h.z <= 0.0 {
            return None;
        }
        Some(PixelCoord::new(h.x / h.z, h.y / h.z))
    }
}

/// Closed depth interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthRange {
    pub min: f64,
    pub max: f64,
}

/// One cascade stage with its interval expressed in world units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageSpec {
    /// 1-based stage number.
    pub index: usize,
    pub hypotheses: usize,
    pub interval: f64,
    pub divisor: usize,
}

impl StageSpec {
    /// Depth extent swept by this stage, `D * interval`.
    pub fn extent(&self) -> f64 {
        self.hypotheses as f64 * self.interval
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Hypotheses {
    Global(Vec<f64>),
    PerPixel(Grid<(f64, f64)>),
}

/// `D` depth hypotheses, shared by all pixels or given as per-pixel ranges.
///
/// Per-pixel ranges are split into `D` equal bins and hypotheses sit at bin
/// centers, so a range centered on `c` yields hypotheses symmetric about `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSet {
    count: usize,
    width: usize,
    height: usize,
    kind: Hypotheses,
}

impl HypothesisSet {
    pub fn global(depths: Vec<f64>, width: usize, height: usize) -> Result<Self> {
        if depths.is_empty() {
            return Err(Error::InvalidInput("empty hypothesis list".into()));
        }
        if !depths.iter().all(|d| d.is_finite() && *d > 0.0) {
            return Err(Error::InvalidInput("hypotheses must be finite and > 0".into()));
        }
        if depths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("hypotheses must be strictly increasing".into()));
        }
        Ok(Self { count: depths.len(), width, height, kind: Hypotheses::Global(depths) })
    }

    pub fn per_pixel(count: usize, ranges: Grid<(f64, f64)>) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidInput("empty hypothesis list".into()));
        }
        for &(lo, hi) in ranges.as_slice() {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(Error::InvalidInput(format!("invalid per-pixel range ({lo}, {hi})")));
            }
        }
        Ok(Self { count, width: ranges.width(), height: ranges.height(), kind: Hypotheses::PerPixel(ranges) })
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Shared depth list, when the set is not per-pixel.
    pub fn depths(&self) -> Option<&[f64]> {
        match &self.kind {
            Hypotheses::Global(d) => Some(d),
            Hypotheses::PerPixel(_) => None,
        }
    }

    pub fn ranges(&self) -> Option<&Grid<(f64, f64)>> {
        match &self.kind {
            Hypotheses::Global(_) => None,
            Hypotheses::PerPixel(r) => Some(r),
        }
    }

    /// Hypothesis `d` at pixel `(u, v)`.
    #[inline]
    pub fn depth(&self, d: usize, u: usize, v: usize) -> f64 {
        match &self.kind {
            Hypotheses::Global(depths) => depths[d],
            Hypotheses::PerPixel(r) => {
                let (lo, hi) = *r.get(u, v);
                lo + (d as f64 + 0.5) * (hi - lo) / self.count as f64
            }
        }
    }

    /// All hypotheses at a pixel, nearest first.
    pub fn column(&self, u: usize, v: usize) -> Vec<f64> {
        (0..self.count).map(|d| self.depth(d, u, v)).collect()
    }

    /// Spacing between consecutive hypotheses at a pixel (mean spacing for global lists).
    pub fn spacing(&self, u: usize, v: usize) -> f64 {
        match &self.kind {
            Hypotheses::Global(d) if d.len() > 1 => (d[d.len() - 1] - d[0]) / (d.len() - 1) as f64,
            Hypotheses::Global(_) => 0.0,
            Hypotheses::PerPixel(r) => {
                let (lo, hi) = *r.get(u, v);
                (hi - lo) / self.count as f64
            }
        }
    }

    /// Fractional hypothesis index of depth `z` at a pixel, if inside `[0, D-1]`.
    pub fn fractional_index(&self, u: usize, v: usize, z: f64) -> Option<f64> {
        let idx = match &self.kind {
            Hypotheses::Global(depths) => {
                if depths.len() == 1 {
                    return (z == depths[0]).then_some(0.0);
                }
                if z < depths[0] || z > depths[depths.len() - 1] {
                    return None;
                }
                let k = depths.partition_point(|&d| d <= z).clamp(1, depths.len() - 1);
                let (a, b) = (depths[k - 1], depths[k]);
                (k - 1) as f64 + (z - a) / (b - a)
            }
            Hypotheses::PerPixel(r) => {
                let (lo, hi) = *r.get(u, v);
                (z - lo) / ((hi - lo) / self.count as f64) - 0.5
            }
        };
        (idx >= 0.0 && idx <= (self.count - 1) as f64).then_some(idx)
    }
}

/// Builds the hypothesis set of one cascade stage.
///
/// Stage 1 sweeps `D` planes `global.min + i * interval`. Later stages center a
/// window of extent `D * interval` on the bilinearly upsampled previous depth,
/// shifted to stay inside `global`; pixels whose previous depth is unusable
/// fall back to the whole global range.
pub fn sample_hypotheses(
    stage: &StageSpec,
    global: DepthRange,
    prev_depth: Option<&DepthMap>,
    width: usize,
    height: usize,
) -> Result<HypothesisSet> {
    if !(1..=3).contains(&stage.index) {
        return Err(Error::InvalidInput(format!("stage must be 1, 2 or 3, got {}", stage.index)));
    }
    if stage.hypotheses < 2 || !(stage.interval > 0.0) {
        return Err(Error::InvalidInput("stage needs >= 2 hypotheses and a positive interval".into()));
    }
    if !(global.min > 0.0 && global.max > global.min) {
        return Err(Error::InvalidInput(format!("invalid global depth range [{}, {}]", global.min, global.max)));
    }
    if stage.index == 1 {
        let depths = (0..stage.hypotheses).map(|i| global.min + i as f64 * stage.interval).collect();
        return HypothesisSet::global(depths, width, height);
    }
    let prev = prev_depth
        .ok_or_else(|| Error::InvalidInput(format!("stage {} requires the previous depth map", stage.index)))?;
    let centers = upsample_depth(prev, width, height);
    let extent = stage.extent().min(global.max - global.min);
    let ranges = centers.map(|&c| {
        if !c.is_finite() {
            return (global.min, global.max);
        }
        let mut lo = c - extent / 2.0;
        let mut hi = c + extent / 2.0;
        if lo < global.min {
            lo = global.min;
            hi = lo + extent;
        }
        if hi > global.max {
            hi = global.max;
            lo = (hi - extent).max(global.min);
        }
        (lo, hi)
    });
    HypothesisSet::per_pixel(stage.hypotheses, ranges)
}

/// Bilinear depth upsampling onto a finer pixel lattice; invalid taps are
/// skipped and the weights renormalized. Pixels with no valid tap are NaN.
pub fn upsample_depth(depth: &DepthMap, width: usize, height: usize) -> Grid<f64> {
    let (cw, ch) = (depth.width(), depth.height());
    let sx = width as f64 / cw as f64;
    let sy = height as f64 / ch as f64;
    Grid::from_fn(width, height, |u, v| {
        let x = ((u as f64 + 0.5) / sx - 0.5).clamp(0.0, (cw - 1) as f64);
        let y = ((v as f64 + 0.5) / sy - 0.5).clamp(0.0, (ch - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(cw - 1);
        let y1 = (y0 + 1).min(ch - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for (xx, yy, w) in
            [(x0, y0, (1.0 - fx) * (1.0 - fy)), (x1, y0, fx * (1.0 - fy)), (x0, y1, (1.0 - fx) * fy), (x1, y1, fx * fy)]
        {
            if w > 0.0 {
                if let Some(d) = depth.value(xx, yy) {
                    acc += w * d;
                    wsum += w;
                }
            }
        }
        if wsum > 0.0 {
            acc / wsum
        } else {
            f64::NAN
        }
    })
}
