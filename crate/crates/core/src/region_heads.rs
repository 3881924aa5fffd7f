//! Deterministic probability and signed-distance heads over the cost volume.
//!
//! The probability head is a depth-wise softmax of the negated, box-smoothed
//! channel-mean cost. The distance head regresses a provisional depth from the
//! probabilities, back-projects it into a surface and scores every hypothesis
//! point by its patch-searched distance to that surface, squashed by `tanh`.

use rayon::prelude::*;

use crate::cost_volume::CostVolume;
use crate::error::{Error, Result};
use crate::fusion::softargmax_depth;
use crate::geometry::{CameraParams, HypothesisSet};
use crate::grid::{Grid, Volume};
use crate::sdf_supervision::{patch_search, surface_points_from_depth, SearchConfig};

/// Per-pixel distribution over depth hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVolume {
    pub data: Volume<f64>,
    /// Pixels where no hypothesis had a valid cost; their distribution is uniform.
    pub low_confidence: Grid<bool>,
}

/// `tanh(signed_distance / scale)` per hypothesis cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceVolume {
    pub data: Volume<f64>,
    pub scale: f64,
}

impl DistanceVolume {
    /// Signed distance in world units, `scale * atanh(S)`.
    #[inline]
    pub fn world(&self, d: usize, v: usize, u: usize) -> f64 {
        self.scale * self.data.get(d, v, u).atanh()
    }
}

/// Value written for pixels whose distances could not be measured.
pub fn saturation_sentinel() -> f64 {
    2.0f64.tanh()
}

/// Separable box filter of the given radius, averaging only in-bounds taps.
fn box_smooth(vol: &Volume<f64>, radius: usize) -> Volume<f64> {
    if radius == 0 {
        return vol.clone();
    }
    let (dn, h, w) = vol.shape();
    let pass = |src: &Volume<f64>, axis: usize| {
        let mut out = Volume::filled(dn, h, w, 0.0);
        let len = [dn, h, w][axis];
        for d in 0..dn {
            for v in 0..h {
                for u in 0..w {
                    let c = [d, v, u][axis];
                    let lo = c.saturating_sub(radius);
                    let hi = (c + radius).min(len - 1);
                    let mut acc = 0.0;
                    for k in lo..=hi {
                        acc += match axis {
                            0 => src.get(k, v, u),
                            1 => src.get(d, k, u),
                            _ => src.get(d, v, k),
                        };
                    }
                    out.set(d, v, u, acc / (hi - lo + 1) as f64);
                }
            }
        }
        out
    };
    let a = pass(vol, 2);
    let b = pass(&a, 1);
    pass(&b, 0)
}

/// `P = softmax_d(-smooth(mean_c C) / temperature)`.
///
/// Invalid cells take the largest valid cost of their pixel before smoothing;
/// pixels with no valid cell take the global maximum and come out uniform
/// and flagged low-confidence.
pub fn probability_from_cost(cv: &CostVolume, temperature: f64, smoothing_radius: usize) -> Result<ProbabilityVolume> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidInput(format!("temperature must be > 0, got {temperature}")));
    }
    if cv.data().iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("cost volume contains non-finite values".into()));
    }
    let (dn, _, h, w) = cv.shape();
    let mut mean = cv.channel_mean();
    let global_max = mean.as_slice().iter().cloned().fold(0.0, f64::max);
    let mut low = Grid::filled(w, h, false);
    for v in 0..h {
        for u in 0..w {
            let pixel_max = (0..dn)
                .filter(|&d| cv.is_valid(d, v, u))
                .map(|d| *mean.get(d, v, u))
                .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
            let fill = match pixel_max {
                Some(m) => m,
                None => {
                    low.set(u, v, true);
                    global_max
                }
            };
            for d in 0..dn {
                if !cv.is_valid(d, v, u) {
                    mean.set(d, v, u, fill);
                }
            }
        }
    }
    let smooth = box_smooth(&mean, smoothing_radius);
    let mut data = Volume::filled(dn, h, w, 0.0);
    for v in 0..h {
        for u in 0..w {
            if *low.get(u, v) {
                for d in 0..dn {
                    data.set(d, v, u, 1.0 / dn as f64);
                }
                continue;
            }
            let cmin = (0..dn).map(|d| *smooth.get(d, v, u)).fold(f64::INFINITY, f64::min);
            let mut z = 0.0;
            for d in 0..dn {
                let e = (-(smooth.get(d, v, u) - cmin) / temperature).exp();
                data.set(d, v, u, e);
                z += e;
            }
            for d in 0..dn {
                let p = data.get(d, v, u) / z;
                data.set(d, v, u, p);
            }
        }
    }
    Ok(ProbabilityVolume { data, low_confidence: low })
}

/// Signed-distance head from the provisional (soft-argmax) surface.
///
/// Pixels flagged low-confidence, or whose patch holds no surface point, get
/// the saturating value `tanh(+-2)`: positive in front of the provisional
/// depth, negative behind, so any `theta < tanh(2)` rejects all of them.
pub fn distance_from_provisional(
    p: &ProbabilityVolume,
    hyps: &HypothesisSet,
    cam: &CameraParams,
    patch_k: usize,
    scale: f64,
) -> Result<DistanceVolume> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidInput(format!("scale must be > 0, got {scale}")));
    }
    let cfg = SearchConfig::new(patch_k)?;
    let provisional = softargmax_depth(p, hyps);
    let surf = surface_points_from_depth(&provisional, cam);
    let (dn, h, w) = p.data.shape();
    // sentinel magnitude: the stage extent (2 * scale) over scale
    let sentinel = saturation_sentinel();
    let radius = cfg.radius();
    let mut data = vec![0.0; dn * h * w];
    data.par_chunks_mut(h * w).enumerate().for_each(|(d, out)| {
        for v in 0..h {
            for u in 0..w {
                let prov = *provisional.data().get(u, v);
                let z = hyps.depth(d, u, v);
                let sign = if z < prov {
                    1.0
                } else if z > prov {
                    -1.0
                } else {
                    0.0
                };
                let flagged = *p.low_confidence.get(u, v) || !*surf.valid.get(u, v);
                let q = cam.back_project_unchecked(u as f64, v as f64, z);
                out[v * w + u] = match (flagged, patch_search(&q, u, v, &surf, radius)) {
                    (false, Some(n)) => (sign * n.distance / scale).tanh(),
                    _ => {
                        if sign < 0.0 {
                            -sentinel
                        } else {
                            sentinel
                        }
                    }
                };
            }
        }
    });
    Ok(DistanceVolume { data: Volume::from_vec(dn, h, w, data), scale })
}
