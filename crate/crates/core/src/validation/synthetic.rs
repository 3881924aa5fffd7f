//! Procedurally textured scenes with analytic geometry, rendered into a small
//! ring of pinhole cameras.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fusion::DepthMap;
use crate::geometry::{CameraParams, Point3};
use crate::grid::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    FrontoPlane,
    SlantedPlane,
    Sphere,
    StepEdge,
    LowTexture,
    SpherePlane,
}

impl SceneKind {
    pub const ALL: [SceneKind; 6] = [
        SceneKind::FrontoPlane,
        SceneKind::SlantedPlane,
        SceneKind::Sphere,
        SceneKind::StepEdge,
        SceneKind::LowTexture,
        SceneKind::SpherePlane,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SceneKind::FrontoPlane => "fronto",
            SceneKind::SlantedPlane => "slanted",
            SceneKind::Sphere => "sphere",
            SceneKind::StepEdge => "step",
            SceneKind::LowTexture => "lowtex",
            SceneKind::SpherePlane => "sphere-plane",
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SceneKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown scene kind '{s}'")))
    }
}

/// Scene layout and rendering knobs.
///
/// View 0 sits at the origin looking down +z; the remaining views are spaced
/// evenly on a circle of radius `baseline` in the z = 0 plane, all aimed at
/// `(0, 0, target_depth)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub kind: SceneKind,
    pub width: usize,
    pub height: usize,
    pub views: usize,
    pub focal: f64,
    pub baseline: f64,
    pub target_depth: f64,
    pub depth_min: f64,
    pub depth_interval: f64,
    pub seed: u64,
    /// Noise octaves; each doubles the frequency and halves the amplitude.
    pub octaves: u32,
    /// Lowest noise frequency in cycles per world unit.
    pub base_frequency: f64,
    /// Samples per pixel side.
    pub supersample: usize,
}

impl SceneSpec {
    pub fn new(kind: SceneKind) -> Self {
        Self {
            kind,
            width: 320,
            height: 256,
            views: 5,
            focal: 320.0,
            baseline: 2.0,
            target_depth: 10.0,
            depth_min: 4.0,
            depth_interval: 0.1,
            seed: 0,
            octaves: 4,
            base_frequency: 1.5,
            supersample: 3,
        }
    }

    /// Same layout at a reduced resolution (focal scaled along).
    pub fn with_size(mut self, width: usize, height: usize) -> Self {
        self.focal *= width as f64 / self.width as f64;
        self.width = width;
        self.height = height;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.views < 2 {
            return Err(Error::InsufficientViews(self.views));
        }
        if self.width < 2 || self.height < 2 || self.supersample == 0 || self.octaves == 0 {
            return Err(Error::InvalidInput("scene needs >= 2x2 pixels, >= 1 sample and >= 1 octave".into()));
        }
        let positive =
            [self.focal, self.baseline, self.target_depth, self.depth_min, self.depth_interval, self.base_frequency];
        if positive.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidInput("scene focal, baseline, depths and frequency must be > 0".into()));
        }
        Ok(())
    }
}

/// Analytic surface element.
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    /// Points with `normal . x = offset`, optionally restricted to `clip.0 . x <= clip.1`.
    /// The normal faces the cameras.
    Plane {
        normal: Vector3<f64>,
        offset: f64,
        clip: Option<(Vector3<f64>, f64)>,
    },
    Sphere {
        center: Point3,
        radius: f64,
    },
}

impl Primitive {
    fn plane(normal: Vector3<f64>, through: Point3, clip: Option<(Vector3<f64>, f64)>) -> Self {
        let n = normal.normalize();
        Primitive::Plane { normal: n, offset: n.dot(&through), clip }
    }

    /// Smallest positive ray parameter where `origin + t * dir` meets the surface.
    pub fn intersect(&self, origin: &Point3, dir: &Vector3<f64>) -> Option<f64> {
        match self {
            Primitive::Plane { normal, offset, clip } => {
                let denom = normal.dot(dir);
                if denom.abs() < 1e-15 {
                    return None;
                }
                let t = (offset - normal.dot(origin)) / denom;
                if !(t > 0.0) {
                    return None;
                }
                if let Some((cn, co)) = clip {
                    if cn.dot(&(origin + dir * t)) > *co {
                        return None;
                    }
                }
                Some(t)
            }
            Primitive::Sphere { center, radius } => {
                let oc = origin - center;
                let a = dir.dot(dir);
                let b = oc.dot(dir);
                let c = oc.dot(&oc) - radius * radius;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let q = -(b + b.signum() * disc.sqrt());
                let (t0, t1) = (q / a, c / q);
                let (near, far) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
                if near > 0.0 {
                    Some(near)
                } else if far > 0.0 {
                    Some(far)
                } else {
                    None
                }
            }
        }
    }

    /// Surface normal at a point on the primitive.
    pub fn normal_at(&self, x: &Point3) -> Vector3<f64> {
        match self {
            Primitive::Plane { normal, .. } => *normal,
            Primitive::Sphere { center, .. } => (x - center).normalize(),
        }
    }

    /// Unsigned Euclidean distance from `x` to the surface.
    pub fn distance(&self, x: &Point3) -> f64 {
        match self {
            Primitive::Plane { normal, offset, clip } => {
                let signed = normal.dot(x) - offset;
                let foot = x - normal * signed;
                match clip {
                    Some((cn, co)) if cn.dot(&foot) > *co => {
                        let m = cn - normal * cn.dot(normal);
                        let edge = foot - m * ((cn.dot(&foot) - co) / cn.dot(&m));
                        (x - edge).norm()
                    }
                    _ => signed.abs(),
                }
            }
            Primitive::Sphere { center, radius } => ((x - center).norm() - radius).abs(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub spec: SceneSpec,
    pub primitives: Vec<Primitive>,
    pub cameras: Vec<CameraParams>,
    pub images: Vec<Image>,
    pub depths: Vec<DepthMap>,
    /// Source views per reference view, nearest camera first.
    pub pairs: Vec<Vec<usize>>,
    /// Constant-albedo disc (center, radius) for the low-texture variant.
    flat_patch: Option<(Point3, f64)>,
}

impl SyntheticScene {
    /// Distance from `x` to the nearest scene surface.
    pub fn surface_distance(&self, x: &Point3) -> f64 {
        self.primitives.iter().map(|p| p.distance(x)).fold(f64::INFINITY, f64::min)
    }

    /// First surface hit along a ray: `(t, primitive index)`.
    pub fn trace(&self, origin: &Point3, dir: &Vector3<f64>) -> Option<(f64, usize)> {
        trace(&self.primitives, origin, dir)
    }

    pub fn flat_patch(&self) -> Option<(Point3, f64)> {
        self.flat_patch
    }
}

fn trace(prims: &[Primitive], origin: &Point3, dir: &Vector3<f64>) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, p) in prims.iter().enumerate() {
        if let Some(t) = p.intersect(origin, dir) {
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, i));
            }
        }
    }
    best
}

fn layout(spec: &SceneSpec) -> (Vec<Primitive>, Option<(Point3, f64)>) {
    let z = spec.target_depth;
    let facing = Vector3::new(0.0, 0.0, -1.0);
    match spec.kind {
        SceneKind::FrontoPlane => (vec![Primitive::plane(facing, Vector3::new(0.0, 0.0, z), None)], None),
        SceneKind::SlantedPlane => {
            let n = Vector3::new(0.45, -0.25, -1.0);
            (vec![Primitive::plane(n, Vector3::new(0.0, 0.0, z), None)], None)
        }
        SceneKind::Sphere => (vec![Primitive::Sphere { center: Vector3::new(0.0, 0.0, z), radius: 0.3 * z }], None),
        SceneKind::StepEdge => {
            // near half-plane for x <= 0 in front of a full far plane
            let near =
                Primitive::plane(facing, Vector3::new(0.0, 0.0, 0.88 * z), Some((Vector3::new(1.0, 0.0, 0.0), 0.0)));
            let far = Primitive::plane(facing, Vector3::new(0.0, 0.0, 1.12 * z), None);
            (vec![near, far], None)
        }
        SceneKind::LowTexture => (
            vec![Primitive::plane(facing, Vector3::new(0.0, 0.0, z), None)],
            Some((Vector3::new(0.0, 0.0, z), 0.15 * z)),
        ),
        SceneKind::SpherePlane => {
            let sphere = Primitive::Sphere { center: Vector3::new(0.05 * z, -0.03 * z, 0.95 * z), radius: 0.2 * z };
            let plane = Primitive::plane(Vector3::new(0.3, 0.2, -1.0), Vector3::new(0.0, 0.0, 1.2 * z), None);
            (vec![sphere, plane], None)
        }
    }
}

fn cameras(spec: &SceneSpec) -> Result<Vec<CameraParams>> {
    let k = Matrix3::new(
        spec.focal,
        0.0,
        (spec.width - 1) as f64 / 2.0,
        0.0,
        spec.focal,
        (spec.height - 1) as f64 / 2.0,
        0.0,
        0.0,
        1.0,
    );
    let target = Vector3::new(0.0, 0.0, spec.target_depth);
    let down = Vector3::new(0.0, 1.0, 0.0);
    let ring = spec.views - 1;
    (0..spec.views)
        .map(|i| {
            let eye = if i == 0 {
                Vector3::zeros()
            } else {
                let a = std::f64::consts::TAU * (i - 1) as f64 / ring as f64;
                Vector3::new(spec.baseline * a.cos(), spec.baseline * a.sin(), 0.0)
            };
            CameraParams::look_at(k, eye, target, down, spec.depth_min, spec.depth_interval)
        })
        .collect()
}

fn lattice(ix: i64, iy: i64, iz: i64, seed: u64) -> f64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for c in [ix, iy, iz] {
        h = h.wrapping_add(c as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    h = (h ^ (h >> 30)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^= h >> 29;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// Smooth 3D value noise in [0, 1).
fn value_noise(p: &Point3, seed: u64) -> f64 {
    let base = p.map(f64::floor);
    let f = p - base;
    let (ix, iy, iz) = (base.x as i64, base.y as i64, base.z as i64);
    let (wx, wy, wz) = (fade(f.x), fade(f.y), fade(f.z));
    let mut acc = 0.0;
    for dz in 0..2 {
        for dy in 0..2 {
            for dx in 0..2 {
                let w = (if dx == 1 { wx } else { 1.0 - wx })
                    * (if dy == 1 { wy } else { 1.0 - wy })
                    * (if dz == 1 { wz } else { 1.0 - wz });
                acc += w * lattice(ix + dx, iy + dy, iz + dz, seed);
            }
        }
    }
    acc
}

fn albedo(spec: &SceneSpec, flat: Option<(Point3, f64)>, x: &Point3) -> f64 {
    if let Some((c, r)) = flat {
        if (x - c).norm() <= r {
            return 0.5;
        }
    }
    let (mut sum, mut norm, mut amp, mut freq) = (0.0, 0.0, 1.0, spec.base_frequency);
    for o in 0..spec.octaves {
        sum += amp * value_noise(&(x * freq), spec.seed.wrapping_add(o as u64 * 7919));
        norm += amp;
        amp *= 0.5;
        freq *= 2.0;
    }
    let n = sum / norm;
    // stretch the mid-range concentrated octave sum back towards [0, 1]
    (0.5 + 1.8 * (n - 0.5)).clamp(0.05, 0.95)
}

/// Renders every view, with ground-truth depth taken along pixel-center rays.
pub fn render_synthetic_scene(spec: &SceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let (primitives, flat_patch) = layout(spec);
    render_primitives(spec, primitives, flat_patch)
}

fn render_primitives(
    spec: &SceneSpec,
    primitives: Vec<Primitive>,
    flat_patch: Option<(Point3, f64)>,
) -> Result<SyntheticScene> {
    let cams = cameras(spec)?;
    let light = Vector3::new(-0.3, -0.4, -1.0).normalize();
    let (w, h, s) = (spec.width, spec.height, spec.supersample);
    let offsets: Vec<f64> = (0..s).map(|i| (i as f64 + 0.5) / s as f64 - 0.5).collect();

    let mut images = Vec::with_capacity(cams.len());
    let mut depths = Vec::with_capacity(cams.len());
    for (view, cam) in cams.iter().enumerate() {
        let origin = cam.center();
        let rt = cam.rotation().transpose();
        let ray = |u: f64, v: f64| rt * cam.ray_camera(u, v);
        let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..h)
            .into_par_iter()
            .map(|v| {
                let mut shade = Vec::with_capacity(w);
                let mut depth = Vec::with_capacity(w);
                for u in 0..w {
                    let mut acc = 0.0;
                    for &dv in &offsets {
                        for &du in &offsets {
                            let dir = ray(u as f64 + du, v as f64 + dv);
                            if let Some((t, i)) = trace(&primitives, &origin, &dir) {
                                let x = origin + dir * t;
                                let n = primitives[i].normal_at(&x);
                                let lambert = n.dot(&light).abs();
                                acc += albedo(spec, flat_patch, &x) * (0.35 + 0.65 * lambert);
                            }
                        }
                    }
                    shade.push(acc / (s * s) as f64);
                    // the ray has unit camera-z, so t is the depth itself
                    let t = trace(&primitives, &origin, &ray(u as f64, v as f64)).map(|(t, _)| t);
                    depth.push(t.unwrap_or(f64::NAN));
                }
                (shade, depth)
            })
            .collect();
        let (shade, depth): (Vec<Vec<f64>>, Vec<Vec<f64>>) = rows.into_iter().unzip();
        let dm = DepthMap::from_values(w, h, depth.concat());
        if dm.valid_count() == 0 {
            return Err(Error::CameraNotViewing(view));
        }
        images.push(Image::gray(w, h, shade.concat()));
        depths.push(dm);
    }

    let pairs = (0..cams.len())
        .map(|i| {
            let mut others: Vec<usize> = (0..cams.len()).filter(|&j| j != i).collect();
            let c = cams[i].center();
            others.sort_by(|&a, &b| {
                let da = (cams[a].center() - c).norm();
                let db = (cams[b].center() - c).norm();
                da.total_cmp(&db).then(a.cmp(&b))
            });
            others
        })
        .collect();

    Ok(SyntheticScene { spec: spec.clone(), primitives, cameras: cams, images, depths, pairs, flat_patch })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: SceneKind) -> SceneSpec {
        let mut s = SceneSpec::new(kind).with_size(40, 32);
        s.supersample = 1;
        s
    }

    #[test]
    fn fronto_plane_depth_is_constant() {
        let scene = render_synthetic_scene(&small(SceneKind::FrontoPlane)).unwrap();
        let d = &scene.depths[0];
        assert_eq!(d.valid_count(), 40 * 32);
        for &z in d.data().as_slice() {
            assert!((z - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_depth_matches_bisection() {
        let scene = render_synthetic_scene(&small(SceneKind::Sphere)).unwrap();
        let (center, radius) = match scene.primitives[0] {
            Primitive::Sphere { center, radius } => (center, radius),
            _ => unreachable!(),
        };
        for (cam, depth) in scene.cameras.iter().zip(&scene.depths) {
            let o = cam.center();
            for v in 0..32 {
                for u in 0..40 {
                    let dir = cam.rotation().transpose() * cam.ray_camera(u as f64, v as f64);
                    // the closest approach splits the ray into an outside and an inside part
                    let t_mid = (center - o).dot(&dir) / dir.dot(&dir);
                    let inside = ((o + dir * t_mid) - center).norm() < radius;
                    match depth.value(u, v) {
                        None => assert!(!inside),
                        Some(z) => {
                            assert!(inside);
                            let (mut lo, mut hi) = (0.0, t_mid);
                            for _ in 0..200 {
                                let mid = 0.5 * (lo + hi);
                                if ((o + dir * mid) - center).norm() > radius {
                                    lo = mid;
                                } else {
                                    hi = mid;
                                }
                            }
                            assert!((z - 0.5 * (lo + hi)).abs() < 1e-9);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn step_edge_has_two_depths() {
        let scene = render_synthetic_scene(&small(SceneKind::StepEdge)).unwrap();
        for &z in scene.depths[0].data().as_slice() {
            assert!((z - 8.8).abs() < 1e-12 || (z - 11.2).abs() < 1e-12, "{z}");
        }
        let near = scene.depths[0].data().as_slice().iter().filter(|&&z| z < 10.0).count();
        assert!(near > 0 && near < 40 * 32);
    }

    #[test]
    fn images_are_textured_and_deterministic() {
        let spec = small(SceneKind::SlantedPlane);
        let a = render_synthetic_scene(&spec).unwrap();
        let b = render_synthetic_scene(&spec).unwrap();
        assert_eq!(a.images[0].data, b.images[0].data);
        let px = &a.images[0].data;
        let mean = px.iter().sum::<f64>() / px.len() as f64;
        let var = px.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / px.len() as f64;
        assert!(var.sqrt() > 0.05);
        let mut other = spec.clone();
        other.seed = 1;
        assert_ne!(render_synthetic_scene(&other).unwrap().images[0].data, a.images[0].data);
    }

    #[test]
    fn empty_view_fails() {
        let spec = small(SceneKind::Sphere);
        let behind = Primitive::Sphere { center: Vector3::new(0.0, 0.0, -50.0), radius: 1.0 };
        assert!(matches!(render_primitives(&spec, vec![behind], None), Err(Error::CameraNotViewing(0))));
    }

    #[test]
    fn clipped_plane_distance() {
        let p = Primitive::plane(Vector3::new(0.0, 0.0, -1.0), Vector3::new(0.0, 0.0, 5.0), Some((Vector3::x(), 0.0)));
        assert!((p.distance(&Vector3::new(-1.0, 0.0, 4.0)) - 1.0).abs() < 1e-12);
        assert!((p.distance(&Vector3::new(3.0, 0.0, 1.0)) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn pairs_rank_nearest_first() {
        let scene = render_synthetic_scene(&small(SceneKind::FrontoPlane)).unwrap();
        assert_eq!(scene.pairs[0], vec![1, 2, 3, 4]);
        assert_eq!(scene.pairs[1][..2], [0, 2]);
    }
}
