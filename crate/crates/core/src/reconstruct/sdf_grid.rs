use crate::error::{Error, Result};
use crate::geometry::{CameraParams, HypothesisSet, Point3};
use crate::region_heads::{saturation_sentinel, DistanceVolume};

/// Cells with `|S|` at or above this are treated as saturated.
const SATURATED: f64 = 0.999;

/// Regular grid placement; `origin` is the center of voxel `(0, 0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub origin: Point3,
    pub spacing: f64,
    pub dims: [usize; 3],
}

/// Signed distances on a regular grid, x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelSDF {
    pub origin: Point3,
    pub spacing: f64,
    pub dims: [usize; 3],
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl VoxelSDF {
    /// Samples `f` at every voxel center.
    pub fn from_fn(cfg: &GridConfig, mut f: impl FnMut(&Point3) -> Option<f64>) -> Result<Self> {
        cfg.validate()?;
        let [nx, ny, nz] = cfg.dims;
        let mut values = Vec::with_capacity(nx * ny * nz);
        let mut valid = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    match f(&cfg.center(i, j, k)).filter(|x| x.is_finite()) {
                        Some(x) => {
                            values.push(x);
                            valid.push(true);
                        }
                        None => {
                            values.push(f64::NAN);
                            valid.push(false);
                        }
                    }
                }
            }
        }
        Ok(Self { origin: cfg.origin, spacing: cfg.spacing, dims: cfg.dims, values, valid })
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> Option<f64> {
        let idx = self.index(i, j, k);
        self.valid[idx].then_some(self.values[idx])
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Point3 {
        self.origin + Point3::new(i as f64, j as f64, k as f64) * self.spacing
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

impl GridConfig {
    fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.spacing.is_finite()) || !self.origin.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("grid spacing must be > 0 and origin finite".into()));
        }
        if self.dims.contains(&0) {
            return Err(Error::InvalidInput("grid dimensions must be >= 1".into()));
        }
        Ok(())
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Point3 {
        self.origin + Point3::new(i as f64, j as f64, k as f64) * self.spacing
    }
}

/// Resamples a reference-view distance volume onto a regular grid.
///
/// Each voxel center is projected into the view and the world distance
/// `scale * atanh(S)` is interpolated bilinearly across the four surrounding
/// pixels and linearly across each pixel's hypotheses. Voxels outside the
/// image or the hypothesis range, or touching saturated cells, are invalid.
pub fn sdf_grid_from_volume(
    s: &DistanceVolume,
    hyps: &HypothesisSet,
    cam: &CameraParams,
    cfg: &GridConfig,
) -> Result<VoxelSDF> {
    let (dn, h, w) = s.data.shape();
    if dn != hyps.count() || h != hyps.height() || w != hyps.width() {
        return Err(Error::InvalidInput("distance volume and hypotheses disagree in shape".into()));
    }
    if w < 2 || h < 2 || dn < 2 {
        return Err(Error::InvalidInput("distance volume must be at least 2x2x2".into()));
    }
    let sentinel = saturation_sentinel();
    let usable = |x: f64| x.abs() < SATURATED && x.abs() != sentinel;
    let mut in_frustum = 0usize;
    let grid = VoxelSDF::from_fn(cfg, |x| {
        let xc = cam.to_camera(x);
        if !(xc.z > 0.0) {
            return None;
        }
        let p = cam.intrinsics() * (xc / xc.z);
        if !(p.x >= 0.0 && p.y >= 0.0 && p.x <= (w - 1) as f64 && p.y <= (h - 1) as f64) {
            return None;
        }
        let u0 = (p.x.floor() as usize).min(w - 2);
        let v0 = (p.y.floor() as usize).min(h - 2);
        let (fu, fv) = (p.x - u0 as f64, p.y - v0 as f64);
        let corners = [
            (u0, v0, (1.0 - fu) * (1.0 - fv)),
            (u0 + 1, v0, fu * (1.0 - fv)),
            (u0, v0 + 1, (1.0 - fu) * fv),
            (u0 + 1, v0 + 1, fu * fv),
        ];
        let mut idx = [0.0; 4];
        for (c, &(u, v, _)) in corners.iter().enumerate() {
            idx[c] = hyps.fractional_index(u, v, xc.z)?;
        }
        in_frustum += 1;
        let mut acc = 0.0;
        for (c, &(u, v, wgt)) in corners.iter().enumerate() {
            let d0 = (idx[c].floor() as usize).min(dn - 2);
            let t = idx[c] - d0 as f64;
            let (s0, s1) = (*s.data.get(d0, v, u), *s.data.get(d0 + 1, v, u));
            if !(usable(s0) && usable(s1)) {
                return None;
            }
            acc += wgt * ((1.0 - t) * s.scale * s0.atanh() + t * s.scale * s1.atanh());
        }
        Some(acc)
    })?;
    if in_frustum == 0 {
        return Err(Error::GridOutsideFrustum);
    }
    Ok(grid)
}
