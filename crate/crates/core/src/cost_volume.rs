//! Per-view features, plane-sweep feature volumes and weighted variance-style
//! cost aggregation across source views.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{CameraParams, HypothesisSet, Warper};
use crate::grid::{area_downsample, bilinear, Grid, Image, Volume};

/// Number of feature channels: normalized intensity, d/du, d/dv.
pub const FEATURE_CHANNELS: usize = 3;

const STD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: Vec<Grid<f64>>,
}

impl FeatureMap {
    pub fn width(&self) -> usize {
        self.channels[0].width()
    }

    pub fn height(&self) -> usize {
        self.channels[0].height()
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }
}

/// Fixed intensity + gradient descriptors at `1/divisor` resolution.
///
/// Intensity is mean-centered and divided by its standard deviation (flat
/// images give all-zero features); gradients are central differences of that channel with
/// replicated borders.
pub fn extract_features(image: &Image, divisor: usize) -> Result<FeatureMap> {
    if image.width == 0 || image.height == 0 || image.data.is_empty() {
        return Err(Error::InvalidInput("empty image".into()));
    }
    if divisor == 0 || !image.width.is_multiple_of(divisor) || !image.height.is_multiple_of(divisor) {
        return Err(Error::InvalidInput(format!(
            "image {}x{} is not divisible by stage divisor {divisor}",
            image.width, image.height
        )));
    }
    let gray = area_downsample(&image.luma(), divisor);
    let n = gray.len() as f64;
    let mean = gray.as_slice().iter().sum::<f64>() / n;
    let var = gray.as_slice().iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    let intensity = if std > STD_FLOOR { gray.map(|x| (x - mean) / std) } else { gray.map(|_| 0.0) };
    let (w, h) = (intensity.width(), intensity.height());
    let gx = Grid::from_fn(w, h, |u, v| {
        let l = *intensity.get(u.saturating_sub(1), v);
        let r = *intensity.get((u + 1).min(w - 1), v);
        0.5 * (r - l)
    });
    let gy = Grid::from_fn(w, h, |u, v| {
        let t = *intensity.get(u, v.saturating_sub(1));
        let b = *intensity.get(u, (v + 1).min(h - 1));
        0.5 * (b - t)
    });
    Ok(FeatureMap { channels: vec![intensity, gx, gy] })
}

/// `D x C x H x W` warped features plus a `D x H x W` validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVolume {
    depth: usize,
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
    valid: Volume<bool>,
}

impl FeatureVolume {
    pub fn from_parts(
        depth: usize,
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<f64>,
        valid: Volume<bool>,
    ) -> Self {
        assert_eq!(data.len(), depth * channels * height * width);
        assert_eq!(valid.shape(), (depth, height, width));
        Self { depth, channels, height, width, data, valid }
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.depth, self.channels, self.height, self.width)
    }

    #[inline]
    pub fn get(&self, d: usize, c: usize, v: usize, u: usize) -> f64 {
        self.data[((d * self.channels + c) * self.height + v) * self.width + u]
    }

    #[inline]
    pub fn is_valid(&self, d: usize, v: usize, u: usize) -> bool {
        *self.valid.get(d, v, u)
    }

    pub fn valid(&self) -> &Volume<bool> {
        &self.valid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Multiplies every feature by `k` (validity unchanged).
    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= k);
        out
    }
}

/// Replicates the reference features across all `depth` slices, all valid.
pub fn reference_volume(feat: &FeatureMap, depth: usize) -> FeatureVolume {
    let (c, h, w) = (feat.channel_count(), feat.height(), feat.width());
    let mut data = Vec::with_capacity(depth * c * h * w);
    for _ in 0..depth {
        for ch in &feat.channels {
            data.extend_from_slice(ch.as_slice());
        }
    }
    FeatureVolume::from_parts(depth, c, h, w, data, Volume::filled(depth, h, w, true))
}

/// Warps source features into the reference frustum, one slice per hypothesis.
///
/// Samples are bilinear; a cell is invalid (value 0) when the warp is behind
/// the source camera or any bilinear tap falls outside the source image.
pub fn build_feature_volume(
    feat_src: &FeatureMap,
    cam_ref: &CameraParams,
    cam_src: &CameraParams,
    hyps: &HypothesisSet,
) -> FeatureVolume {
    let (h, w) = (hyps.height(), hyps.width());
    let c = feat_src.channel_count();
    let dcount = hyps.count();
    let warper = Warper::new(cam_ref, cam_src);
    let slice = c * h * w;
    let mut data = vec![0.0; dcount * slice];
    let mut valid = vec![false; dcount * h * w];
    data.par_chunks_mut(slice).zip(valid.par_chunks_mut(h * w)).enumerate().for_each(|(d, (out, ok))| {
        for v in 0..h {
            for u in 0..w {
                let depth = hyps.depth(d, u, v);
                let Some(q) = warper.warp(u as f64, v as f64, depth) else {
                    continue;
                };
                if !q.inside(feat_src.width(), feat_src.height()) {
                    continue;
                }
                for (ci, ch) in feat_src.channels.iter().enumerate() {
                    out[(ci * h + v) * w + u] = bilinear(ch, q.u, q.v).unwrap_or(0.0);
                }
                ok[v * w + u] = true;
            }
        }
    });
    FeatureVolume::from_parts(dcount, c, h, w, data, Volume::from_vec(dcount, h, w, valid))
}

/// Non-negative per-view weights, either one per pixel or one per cell.
#[derive(Debug, Clone, PartialEq)]
pub enum ViewWeightMap {
    Uniform,
    PerPixel(Grid<f64>),
    PerCell(Volume<f64>),
}

impl ViewWeightMap {
    #[inline]
    pub fn weight(&self, d: usize, v: usize, u: usize) -> f64 {
        match self {
            ViewWeightMap::Uniform => 1.0,
            ViewWeightMap::PerPixel(g) => *g.get(u, v),
            ViewWeightMap::PerCell(vol) => *vol.get(d, v, u),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMode {
    #[default]
    Uniform,
    /// `exp(-min_d mean_c (V_i - V_0)^2)` per pixel, normalized to mean 1 across views.
    Similarity,
    /// Per cell, only the better-matching half of the valid views contributes.
    /// A view that disagrees at a depth (typically because the point is
    /// occluded in it) is dropped there instead of inflating the cost.
    Visibility,
}

impl std::str::FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(WeightMode::Uniform),
            "similarity" => Ok(WeightMode::Similarity),
            "visibility" => Ok(WeightMode::Visibility),
            other => Err(Error::InvalidInput(format!("unknown weight mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for WeightMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WeightMode::Uniform => "uniform",
            WeightMode::Similarity => "similarity",
            WeightMode::Visibility => "visibility",
        })
    }
}

/// Minimum over valid depths of the channel-mean squared residual; `None`
/// when no depth is valid at the pixel.
fn best_residual(v0: &FeatureVolume, vi: &FeatureVolume, v: usize, u: usize) -> Option<f64> {
    let (dcount, c, _, _) = v0.shape();
    let mut best: Option<f64> = None;
    for d in 0..dcount {
        if !vi.is_valid(d, v, u) || !v0.is_valid(d, v, u) {
            continue;
        }
        let r = (0..c)
            .map(|ch| {
                let e = vi.get(d, ch, v, u) - v0.get(d, ch, v, u);
                e * e
            })
            .sum::<f64>()
            / c as f64;
        best = Some(best.map_or(r, |b: f64| b.min(r)));
    }
    best
}

/// Per cell, keeps the `ceil(n/2)` valid views with the smallest channel-mean
/// residual at weight `n/k` and drops the rest. Ties go to the lower view index.
fn visibility_weights(v0: &FeatureVolume, sources: &[FeatureVolume]) -> Vec<ViewWeightMap> {
    let (dcount, c, h, w) = v0.shape();
    let n = sources.len();
    let plane = h * w;
    let slices: Vec<Vec<f64>> = (0..dcount)
        .into_par_iter()
        .map(|d| {
            // view-major weights for this depth slice
            let mut out = vec![0.0; n * plane];
            let mut ranked: Vec<(f64, usize)> = Vec::with_capacity(n);
            for p in 0..plane {
                let (v, u) = (p / w, p % w);
                ranked.clear();
                for (i, vi) in sources.iter().enumerate() {
                    if vi.is_valid(d, v, u) {
                        let r = (0..c)
                            .map(|ch| {
                                let e = vi.get(d, ch, v, u) - v0.get(d, ch, v, u);
                                e * e
                            })
                            .sum::<f64>();
                        ranked.push((r, i));
                    }
                }
                if ranked.is_empty() {
                    for i in 0..n {
                        out[i * plane + p] = 1.0;
                    }
                    continue;
                }
                ranked.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let keep = ranked.len().div_ceil(2);
                let wt = ranked.len() as f64 / keep as f64;
                for &(_, i) in &ranked[..keep] {
                    out[i * plane + p] = wt;
                }
            }
            out
        })
        .collect();
    (0..n)
        .map(|i| {
            let mut data = Vec::with_capacity(dcount * plane);
            for s in &slices {
                data.extend_from_slice(&s[i * plane..(i + 1) * plane]);
            }
            ViewWeightMap::PerCell(Volume::from_vec(dcount, h, w, data))
        })
        .collect()
}

pub fn compute_view_weights(v0: &FeatureVolume, sources: &[FeatureVolume], mode: WeightMode) -> Vec<ViewWeightMap> {
    match mode {
        WeightMode::Uniform => vec![ViewWeightMap::Uniform; sources.len()],
        WeightMode::Visibility => visibility_weights(v0, sources),
        WeightMode::Similarity => {
            let (_, _, h, w) = v0.shape();
            let raw: Vec<Grid<f64>> = sources
                .iter()
                .map(|vi| Grid::from_fn(w, h, |u, v| best_residual(v0, vi, v, u).map_or(0.0, |r| (-r).exp())))
                .collect();
            let n = sources.len() as f64;
            let mean = Grid::from_fn(w, h, |u, v| raw.iter().map(|g| *g.get(u, v)).sum::<f64>() / n);
            raw.into_iter()
                .map(|g| {
                    ViewWeightMap::PerPixel(Grid::from_fn(w, h, |u, v| {
                        let m = *mean.get(u, v);
                        if m > 0.0 {
                            *g.get(u, v) / m
                        } else {
                            1.0
                        }
                    }))
                })
                .collect()
        }
    }
}

/// Aggregated matching cost with per-cell validity.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    depth: usize,
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
    valid: Volume<bool>,
    pub view_count: usize,
}

impl CostVolume {
    pub fn from_parts(
        depth: usize,
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<f64>,
        valid: Volume<bool>,
        view_count: usize,
    ) -> Self {
        assert_eq!(data.len(), depth * channels * height * width);
        Self { depth, channels, height, width, data, valid, view_count }
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.depth, self.channels, self.height, self.width)
    }

    #[inline]
    pub fn get(&self, d: usize, c: usize, v: usize, u: usize) -> f64 {
        self.data[((d * self.channels + c) * self.height + v) * self.width + u]
    }

    #[inline]
    pub fn is_valid(&self, d: usize, v: usize, u: usize) -> bool {
        *self.valid.get(d, v, u)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Channel-mean cost, `D x H x W`.
    pub fn channel_mean(&self) -> Volume<f64> {
        let (d, c, h, w) = self.shape();
        let mut out = Volume::filled(d, h, w, 0.0);
        for di in 0..d {
            for v in 0..h {
                for u in 0..w {
                    let m = (0..c).map(|ch| self.get(di, ch, v, u)).sum::<f64>() / c as f64;
                    out.set(di, v, u, m);
                }
            }
        }
        out
    }
}

/// `C = sum_i W_i * (V_i - V_0)^2 / n_valid` over the views valid at each cell.
///
/// Cells valid in no source view get cost 0 and are marked invalid.
pub fn aggregate_cost(v0: &FeatureVolume, sources: &[FeatureVolume], weights: &[ViewWeightMap]) -> Result<CostVolume> {
    if sources.is_empty() {
        return Err(Error::InvalidInput("at least one source view is required".into()));
    }
    if weights.len() != sources.len() {
        return Err(Error::InvalidInput(format!("{} weight maps for {} source views", weights.len(), sources.len())));
    }
    let shape = v0.shape();
    if sources.iter().any(|s| s.shape() != shape) {
        return Err(Error::InvalidInput("feature volume shapes differ".into()));
    }
    let (dcount, c, h, w) = shape;
    let mut data = vec![0.0; dcount * c * h * w];
    let mut valid = vec![false; dcount * h * w];
    data.par_chunks_mut(c * h * w).zip(valid.par_chunks_mut(h * w)).enumerate().for_each(|(d, (out, ok))| {
        let mut terms = Vec::with_capacity(sources.len());
        for v in 0..h {
            for u in 0..w {
                let n = sources.iter().filter(|s| s.is_valid(d, v, u)).count();
                if n == 0 {
                    continue;
                }
                ok[v * w + u] = true;
                let inv = 1.0 / n as f64;
                for ch in 0..c {
                    let r0 = v0.get(d, ch, v, u);
                    terms.clear();
                    for (src, wt) in sources.iter().zip(weights) {
                        if src.is_valid(d, v, u) {
                            let e = src.get(d, ch, v, u) - r0;
                            terms.push(wt.weight(d, v, u) * e * e);
                        }
                    }
                    // canonical summation order keeps the result independent of view order
                    terms.sort_unstable_by(f64::total_cmp);
                    out[(ch * h + v) * w + u] = terms.iter().sum::<f64>() * inv;
                }
            }
        }
    });
    Ok(CostVolume::from_parts(dcount, c, h, w, data, Volume::from_vec(dcount, h, w, valid), sources.len() + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_volume(rng: &mut ChaCha8Rng, d: usize, c: usize, h: usize, w: usize, p_valid: f64) -> FeatureVolume {
        let data = (0..d * c * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>();
        let valid: Vec<bool> = (0..d * h * w).map(|_| rng.gen_bool(p_valid)).collect();
        let mut data = data;
        for di in 0..d {
            for v in 0..h {
                for u in 0..w {
                    if !valid[(di * h + v) * w + u] {
                        for ch in 0..c {
                            data[((di * c + ch) * h + v) * w + u] = 0.0;
                        }
                    }
                }
            }
        }
        FeatureVolume::from_parts(d, c, h, w, data, Volume::from_vec(d, h, w, valid))
    }

    fn all_valid(vol: FeatureVolume) -> FeatureVolume {
        let (d, c, h, w) = vol.shape();
        FeatureVolume::from_parts(d, c, h, w, vol.data().to_vec(), Volume::filled(d, h, w, true))
    }

    /// Straight quadruple loop over (view, depth, channel, pixel).
    fn naive_cost(v0: &FeatureVolume, sources: &[FeatureVolume], weights: &[ViewWeightMap]) -> Vec<f64> {
        let (d, c, h, w) = v0.shape();
        let mut out = vec![0.0; d * c * h * w];
        for di in 0..d {
            for ch in 0..c {
                for v in 0..h {
                    for u in 0..w {
                        let mut n = 0usize;
                        let mut s = 0.0;
                        for (i, src) in sources.iter().enumerate() {
                            if src.is_valid(di, v, u) {
                                n += 1;
                                let e = src.get(di, ch, v, u) - v0.get(di, ch, v, u);
                                s += weights[i].weight(di, v, u) * e * e;
                            }
                        }
                        out[((di * c + ch) * h + v) * w + u] = if n > 0 { s / n as f64 } else { 0.0 };
                    }
                }
            }
        }
        out
    }

    #[test]
    fn constant_image_has_zero_features() {
        let img = Image::gray(8, 8, vec![0.4; 64]);
        let f = extract_features(&img, 2).unwrap();
        for ch in &f.channels {
            assert!(ch.as_slice().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn vertical_step_edge_gradient_band() {
        let img = Image::gray(8, 4, (0..32).map(|i| if i % 8 >= 4 { 1.0 } else { 0.0 }).collect());
        let f = extract_features(&img, 1).unwrap();
        for v in 0..4 {
            for u in 0..8 {
                let gx = *f.channels[1].get(u, v);
                if u == 3 || u == 4 {
                    assert!(gx > 0.0);
                } else {
                    assert_eq!(gx, 0.0);
                }
                assert_eq!(*f.channels[2].get(u, v), 0.0);
            }
        }
    }

    #[test]
    fn features_match_scalar_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pix: Vec<f64> = (0..256).map(|_| rng.gen::<f64>()).collect();
        let img = Image::gray(16, 16, pix.clone());
        let f = extract_features(&img, 1).unwrap();
        let mean: f64 = pix.iter().sum::<f64>() / 256.0;
        let mut var = 0.0;
        for p in &pix {
            var += (p - mean) * (p - mean);
        }
        let std = (var / 256.0).sqrt();
        let at = |u: i64, v: i64| {
            let uu = u.clamp(0, 15) as usize;
            let vv = v.clamp(0, 15) as usize;
            (pix[vv * 16 + uu] - mean) / std
        };
        for v in 0..16i64 {
            for u in 0..16i64 {
                let (uu, vv) = (u as usize, v as usize);
                assert!((f.channels[0].get(uu, vv) - at(u, v)).abs() < 1e-12);
                assert!((f.channels[1].get(uu, vv) - (at(u + 1, v) - at(u - 1, v)) / 2.0).abs() < 1e-12);
                assert!((f.channels[2].get(uu, vv) - (at(u, v + 1) - at(u, v - 1)) / 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn extract_rejects_bad_divisor() {
        let img = Image::gray(6, 6, vec![0.0; 36]);
        assert!(extract_features(&img, 4).is_err());
    }

    #[test]
    fn identical_cameras_replicate_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = Image::gray(12, 10, (0..120).map(|_| rng.gen()).collect());
        let f = extract_features(&img, 1).unwrap();
        let cam = CameraParams::pinhole(20.0, 6.0, 5.0, Matrix3::identity(), Vector3::zeros(), 1.0, 1.0).unwrap();
        let hyps = HypothesisSet::global(vec![1.0, 2.0, 3.0], 12, 10).unwrap();
        let vol = build_feature_volume(&f, &cam, &cam, &hyps);
        for d in 0..3 {
            for c in 0..3 {
                for v in 0..10 {
                    for u in 0..12 {
                        assert!(vol.is_valid(d, v, u));
                        assert!((vol.get(d, c, v, u) - f.channels[c].get(u, v)).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn disjoint_frusta_are_all_invalid() {
        let img = Image::gray(8, 8, vec![0.5; 64]);
        let f = extract_features(&img, 1).unwrap();
        let r = CameraParams::pinhole(10.0, 4.0, 4.0, Matrix3::identity(), Vector3::zeros(), 1.0, 1.0).unwrap();
        // source looks the opposite way from far away
        let rot = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        let s = CameraParams::pinhole(10.0, 4.0, 4.0, rot, Vector3::new(0.0, 0.0, -100.0), 1.0, 1.0).unwrap();
        let hyps = HypothesisSet::global(vec![1.0, 2.0], 8, 8).unwrap();
        let vol = build_feature_volume(&f, &r, &s, &hyps);
        assert!(vol.valid().as_slice().iter().all(|&b| !b));
        assert!(vol.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn two_view_cost_is_squared_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v0 = all_valid(random_volume(&mut rng, 3, 2, 4, 5, 1.0));
        let v1 = all_valid(random_volume(&mut rng, 3, 2, 4, 5, 1.0));
        let c = aggregate_cost(&v0, std::slice::from_ref(&v1), &[ViewWeightMap::Uniform]).unwrap();
        for (i, x) in c.data().iter().enumerate() {
            let e = v1.data()[i] - v0.data()[i];
            assert!((x - e * e).abs() < 1e-15);
        }
        let same =
            aggregate_cost(&v0, &[v0.clone(), v0.clone()], &[ViewWeightMap::Uniform, ViewWeightMap::Uniform]).unwrap();
        assert!(same.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn cost_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v0 = all_valid(random_volume(&mut rng, 8, 6, 4, 5, 1.0));
        let sources: Vec<_> = (0..3).map(|_| random_volume(&mut rng, 8, 6, 4, 5, 0.7)).collect();
        let weights: Vec<_> = (0..3)
            .map(|_| {
                ViewWeightMap::PerCell(Volume::from_vec(8, 4, 5, (0..160).map(|_| rng.gen_range(0.0..2.0)).collect()))
            })
            .collect();
        let c = aggregate_cost(&v0, &sources, &weights).unwrap();
        let oracle = naive_cost(&v0, &sources, &weights);
        for (a, b) in c.data().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10);
        }
        for d in 0..8 {
            for v in 0..4 {
                for u in 0..5 {
                    let any = sources.iter().any(|s| s.is_valid(d, v, u));
                    assert_eq!(c.is_valid(d, v, u), any);
                }
            }
        }
    }

    #[test]
    fn cost_is_permutation_invariant_and_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v0 = all_valid(random_volume(&mut rng, 4, 3, 3, 3, 1.0));
        let s: Vec<_> = (0..3).map(|_| random_volume(&mut rng, 4, 3, 3, 3, 0.8)).collect();
        let wts = vec![ViewWeightMap::Uniform; 3];
        let a = aggregate_cost(&v0, &s, &wts).unwrap();
        let b = aggregate_cost(&v0, &[s[2].clone(), s[0].clone(), s[1].clone()], &wts).unwrap();
        assert_eq!(a.data(), b.data());
        let k = 3.7;
        let scaled: Vec<_> = s.iter().map(|v| v.scaled(k)).collect();
        let c = aggregate_cost(&v0.scaled(k), &scaled, &wts).unwrap();
        for (x, y) in a.data().iter().zip(c.data()) {
            assert!((y - k * k * x).abs() < 1e-9);
            assert!(*x >= 0.0);
        }
    }

    #[test]
    fn similarity_weights_prefer_matching_view() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v0 = all_valid(random_volume(&mut rng, 5, 3, 4, 4, 1.0));
        let unrelated = all_valid(random_volume(&mut rng, 5, 3, 4, 4, 1.0));
        let w = compute_view_weights(&v0, &[v0.clone(), unrelated], WeightMode::Similarity);
        for v in 0..4 {
            for u in 0..4 {
                assert!(w[0].weight(0, v, u) > w[1].weight(0, v, u));
                assert!((w[0].weight(0, v, u) + w[1].weight(0, v, u) - 2.0).abs() < 1e-12);
            }
        }
        let same = compute_view_weights(&v0, &[v0.clone(), v0.clone(), v0.clone()], WeightMode::Similarity);
        for m in &same {
            for v in 0..4 {
                for u in 0..4 {
                    assert!((m.weight(2, v, u) - 1.0).abs() < 1e-12);
                }
            }
        }
        let uni = compute_view_weights(&v0, std::slice::from_ref(&v0), WeightMode::Uniform);
        assert_eq!(uni[0].weight(1, 2, 3), 1.0);
    }

    #[test]
    fn visibility_weights_drop_the_worse_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let v0 = all_valid(random_volume(&mut rng, 4, 3, 3, 5, 1.0));
        let a = all_valid(random_volume(&mut rng, 4, 3, 3, 5, 1.0));
        let b = all_valid(random_volume(&mut rng, 4, 3, 3, 5, 1.0));
        let w = compute_view_weights(&v0, &[a.clone(), v0.clone(), b.clone(), v0.clone()], WeightMode::Visibility);
        for d in 0..4 {
            for v in 0..3 {
                for u in 0..5 {
                    let ws: Vec<f64> = w.iter().map(|m| m.weight(d, v, u)).collect();
                    assert_eq!(ws, vec![0.0, 2.0, 0.0, 2.0]);
                }
            }
        }
        // matching views carry zero residual, so the aggregated cost vanishes
        let c = aggregate_cost(&v0, &[a, v0.clone(), b, v0.clone()], &w).unwrap();
        assert!(c.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn visibility_weights_follow_valid_views() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let v0 = all_valid(random_volume(&mut rng, 6, 3, 4, 4, 1.0));
        let srcs: Vec<_> = (0..3).map(|_| random_volume(&mut rng, 6, 3, 4, 4, 0.6)).collect();
        let w = compute_view_weights(&v0, &srcs, WeightMode::Visibility);
        for d in 0..6 {
            for v in 0..4 {
                for u in 0..4 {
                    let valid: Vec<usize> = (0..3).filter(|&i| srcs[i].is_valid(d, v, u)).collect();
                    if valid.is_empty() {
                        continue;
                    }
                    let kept: Vec<usize> = valid.iter().copied().filter(|&i| w[i].weight(d, v, u) > 0.0).collect();
                    assert_eq!(kept.len(), valid.len().div_ceil(2));
                    let total: f64 = valid.iter().map(|&i| w[i].weight(d, v, u)).sum();
                    assert!((total - valid.len() as f64).abs() < 1e-12, "weights average to 1 over valid views");
                }
            }
        }
    }

    #[test]
    fn visibility_cost_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let v0 = random_volume(&mut rng, 5, 3, 4, 6, 1.0);
        let s: Vec<_> = (0..4).map(|_| random_volume(&mut rng, 5, 3, 4, 6, 0.8)).collect();
        let fwd = aggregate_cost(&v0, &s, &compute_view_weights(&v0, &s, WeightMode::Visibility)).unwrap();
        let rev: Vec<_> = s.iter().rev().cloned().collect();
        let bwd = aggregate_cost(&v0, &rev, &compute_view_weights(&v0, &rev, WeightMode::Visibility)).unwrap();
        assert_eq!(fwd.data(), bwd.data());
    }

    #[test]
    fn weight_mode_names_round_trip() {
        for m in [WeightMode::Uniform, WeightMode::Similarity, WeightMode::Visibility] {
            assert_eq!(m.to_string().parse::<WeightMode>().unwrap(), m);
        }
        assert!("softmin".parse::<WeightMode>().is_err());
    }
}
