//! Depth regression from the probability volume, optionally filtered by the
//! signed-distance volume before the weighted sum.

use crate::error::{Error, Result};
use crate::geometry::HypothesisSet;
use crate::grid::Grid;
use crate::region_heads::{DistanceVolume, ProbabilityVolume};

/// Per-pixel depth with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    data: Grid<f64>,
    valid: Grid<bool>,
}

impl DepthMap {
    pub fn new(data: Grid<f64>, valid: Grid<bool>) -> Self {
        assert!(data.same_shape(&valid));
        Self { data, valid }
    }

    /// Validity is inferred: finite values are valid.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Self {
        let data = Grid::from_vec(width, height, values);
        let valid = data.map(|d| d.is_finite());
        Self { data, valid }
    }

    pub fn width(&self) -> usize {
        self.data.width()
    }

    pub fn height(&self) -> usize {
        self.data.height()
    }

    /// Depth at a pixel when valid.
    #[inline]
    pub fn value(&self, u: usize, v: usize) -> Option<f64> {
        if *self.valid.get(u, v) {
            Some(*self.data.get(u, v))
        } else {
            None
        }
    }

    pub fn data(&self) -> &Grid<f64> {
        &self.data
    }

    pub fn valid(&self) -> &Grid<bool> {
        &self.valid
    }

    pub fn set(&mut self, u: usize, v: usize, depth: Option<f64>) {
        match depth {
            Some(d) => {
                self.data.set(u, v, d);
                self.valid.set(u, v, true);
            }
            None => {
                self.data.set(u, v, f64::NAN);
                self.valid.set(u, v, false);
            }
        }
    }

    /// Values with invalid pixels replaced by NaN (the on-disk convention).
    pub fn to_nan_filled(&self) -> Grid<f64> {
        Grid::from_fn(self.width(), self.height(), |u, v| self.value(u, v).unwrap_or(f64::NAN))
    }

    pub fn valid_count(&self) -> usize {
        self.valid.as_slice().iter().filter(|&&b| b).count()
    }

    /// Area-downsampled copy; a coarse pixel is valid only if its whole block is.
    pub fn downsample(&self, factor: usize) -> DepthMap {
        if factor == 1 {
            return self.clone();
        }
        let w = self.width() / factor;
        let h = self.height() / factor;
        let mut out = DepthMap::from_values(w, h, vec![f64::NAN; w * h]);
        for v in 0..h {
            for u in 0..w {
                let mut acc = 0.0;
                let mut ok = true;
                for dy in 0..factor {
                    for dx in 0..factor {
                        match self.value(u * factor + dx, v * factor + dy) {
                            Some(d) => acc += d,
                            None => ok = false,
                        }
                    }
                }
                if ok {
                    out.set(u, v, Some(acc / (factor * factor) as f64));
                }
            }
        }
        out
    }
}

/// Per-pixel confidence in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    pub data: Grid<f64>,
}

/// Threshold on `|S|` used to discard hypotheses far from the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    theta: f64,
}

impl FusionConfig {
    pub const DEFAULT_THETA: f64 = 0.1;

    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::InvalidInput(format!("theta must be in (0, 1], got {theta}")));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { theta: Self::DEFAULT_THETA }
    }
}

fn check_shapes(p: &ProbabilityVolume, hyps: &HypothesisSet) {
    let (d, h, w) = p.data.shape();
    assert_eq!(d, hyps.count(), "probability/hypothesis count mismatch");
    assert_eq!((h, w), (hyps.height(), hyps.width()), "probability/hypothesis shape mismatch");
}

/// Probability-weighted depth over the hypotheses accepted by `keep`,
/// renormalized by the accepted mass. Returns `None` when nothing is accepted.
#[inline]
fn weighted_depth(
    p: &ProbabilityVolume,
    hyps: &HypothesisSet,
    u: usize,
    v: usize,
    mut keep: impl FnMut(usize) -> bool,
) -> Option<(f64, usize)> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut kept = 0;
    for d in 0..hyps.count() {
        if keep(d) {
            let w = *p.data.get(d, v, u);
            num += w * hyps.depth(d, u, v);
            den += w;
            kept += 1;
        }
    }
    (kept > 0 && den > 0.0).then(|| (num / den, kept))
}

fn argmax_hypothesis(p: &ProbabilityVolume, u: usize, v: usize) -> usize {
    let mut best = 0;
    for d in 1..p.data.depth() {
        if *p.data.get(d, v, u) > *p.data.get(best, v, u) {
            best = d;
        }
    }
    best
}

fn output_validity(p: &ProbabilityVolume) -> Grid<bool> {
    p.low_confidence.map(|&low| !low)
}

/// Expected depth under `P`: `sum_d hyps(d) * P(d)` (normalized by the mass of `P`).
pub fn softargmax_depth(p: &ProbabilityVolume, hyps: &HypothesisSet) -> DepthMap {
    check_shapes(p, hyps);
    let (_, h, w) = p.data.shape();
    let data = Grid::from_fn(w, h, |u, v| {
        weighted_depth(p, hyps, u, v, |_| true)
            .map(|(d, _)| d)
            .unwrap_or_else(|| hyps.depth(argmax_hypothesis(p, u, v), u, v))
    });
    DepthMap::new(data, output_validity(p))
}

/// Two-branch fusion: keep hypotheses with `|S| <= theta`, renormalize their
/// probabilities and regress. A pixel with nothing retained falls back to the
/// argmax hypothesis and reports a retained count of 0.
pub fn fuse_branches(
    p: &ProbabilityVolume,
    s: &DistanceVolume,
    hyps: &HypothesisSet,
    cfg: &FusionConfig,
) -> (DepthMap, Grid<usize>) {
    check_shapes(p, hyps);
    assert_eq!(p.data.shape(), s.data.shape(), "probability/distance shape mismatch");
    let (_, h, w) = p.data.shape();
    let theta = cfg.theta();
    let mut retained = Grid::filled(w, h, 0usize);
    let data =
        Grid::from_fn(w, h, |u, v| match weighted_depth(p, hyps, u, v, |d| s.data.get(d, v, u).abs() <= theta) {
            Some((depth, kept)) => {
                retained.set(u, v, kept);
                depth
            }
            None => hyps.depth(argmax_hypothesis(p, u, v), u, v),
        });
    (DepthMap::new(data, output_validity(p)), retained)
}

/// Probability mass of the 4 hypotheses nearest the regressed depth, zeroed
/// where fusion fell back (`retained == 0`) or `P` carries no information.
pub fn confidence_map(
    p: &ProbabilityVolume,
    hyps: &HypothesisSet,
    depth: &DepthMap,
    retained: &Grid<usize>,
) -> ConfidenceMap {
    check_shapes(p, hyps);
    let (dcount, h, w) = p.data.shape();
    let data = Grid::from_fn(w, h, |u, v| {
        if *retained.get(u, v) == 0 || *p.low_confidence.get(u, v) {
            return 0.0;
        }
        let z = *depth.data().get(u, v);
        let mut order: Vec<usize> = (0..dcount).collect();
        order.sort_by(|&a, &b| {
            let da = (hyps.depth(a, u, v) - z).abs();
            let db = (hyps.depth(b, u, v) - z).abs();
            da.total_cmp(&db).then(a.cmp(&b))
        });
        let c: f64 = order.iter().take(4).map(|&d| *p.data.get(d, v, u)).sum();
        c.clamp(0.0, 1.0)
    });
    ConfidenceMap { data }
}

/// Retained count of `D` everywhere; pairs with [`softargmax_depth`] when fusion is off.
pub fn full_retention(hyps: &HypothesisSet) -> Grid<usize> {
    Grid::filled(hyps.width(), hyps.height(), hyps.count())
}
