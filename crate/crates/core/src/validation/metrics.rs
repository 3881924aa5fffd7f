use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Point3;

/// Accuracy/completeness (mean distances) and precision/recall/F-score
/// (percent of points within `tau`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub completeness: f64,
    pub overall: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub tau: f64,
    pub max_dist: f64,
}

/// Static 3-d tree over a point slice, median-split on the widest axis.
struct KdTree<'a> {
    points: &'a [Point3],
    /// Point indices arranged so each subtree is a contiguous range whose
    /// middle element is the splitting point.
    order: Vec<usize>,
    axes: Vec<u8>,
}

impl<'a> KdTree<'a> {
    fn new(points: &'a [Point3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut axes = vec![0u8; points.len()];
        Self::build(points, &mut order, &mut axes);
        Self { points, order, axes }
    }

    fn build(points: &[Point3], order: &mut [usize], axes: &mut [u8]) {
        if order.len() <= 1 {
            return;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in order.iter() {
            for a in 0..3 {
                lo[a] = lo[a].min(points[i][a]);
                hi[a] = hi[a].max(points[i][a]);
            }
        }
        let axis = (0..3).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap_or(0);
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
        axes[mid] = axis as u8;
        let (left, rest) = order.split_at_mut(mid);
        let (laxes, raxes) = axes.split_at_mut(mid);
        Self::build(points, left, laxes);
        Self::build(points, &mut rest[1..], &mut raxes[1..]);
    }

    /// Squared distance to the nearest point, searching only within `best2`.
    fn nearest2(&self, q: &Point3, lo: usize, hi: usize, best2: &mut f64) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = &self.points[self.order[mid]];
        *best2 = best2.min((p - q).norm_squared());
        let axis = self.axes[mid] as usize;
        let delta = q[axis] - p[axis];
        let (near, far) = if delta < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.nearest2(q, near.0, near.1, best2);
        if delta * delta < *best2 {
            self.nearest2(q, far.0, far.1, best2);
        }
    }

    fn nearest(&self, q: &Point3, cutoff: f64) -> Option<f64> {
        let mut best2 = if cutoff.is_finite() { cutoff * cutoff * (1.0 + 1e-12) } else { f64::INFINITY };
        self.nearest2(q, 0, self.order.len(), &mut best2);
        let d = best2.sqrt();
        (d <= cutoff).then_some(d)
    }
}

fn nearest_distances(from: &[Point3], to: &[Point3], cutoff: f64) -> Vec<Option<f64>> {
    let tree = KdTree::new(to);
    from.par_iter().map(|q| tree.nearest(q, cutoff)).collect()
}

/// Compare a reconstruction against ground truth.
///
/// Distances beyond `max_dist` (default `20 * tau`) are outliers: they count
/// against precision/recall but are excluded from the mean distances.
pub fn evaluate_point_clouds(recon: &[Point3], gt: &[Point3], tau: f64, max_dist: Option<f64>) -> Result<EvalReport> {
    if recon.is_empty() || gt.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput(format!("tau must be > 0, got {tau}")));
    }
    let max_dist = max_dist.unwrap_or(20.0 * tau);
    if !(max_dist >= tau) {
        return Err(Error::InvalidInput(format!("max_dist {max_dist} must be >= tau {tau}")));
    }
    let side = |from: &[Point3], to: &[Point3]| {
        let d = nearest_distances(from, to, max_dist);
        let kept: Vec<f64> = d.iter().flatten().copied().collect();
        let mean = if kept.is_empty() { f64::INFINITY } else { kept.iter().sum::<f64>() / kept.len() as f64 };
        let within = kept.iter().filter(|&&x| x <= tau).count();
        (mean, 100.0 * within as f64 / from.len() as f64)
    };
    let (accuracy, precision) = side(recon, gt);
    let (completeness, recall) = side(gt, recon);
    let f_score = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(EvalReport {
        accuracy,
        completeness,
        overall: 0.5 * (accuracy + completeness),
        precision,
        recall,
        f_score,
        tau,
        max_dist,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_clouds_score_perfectly() {
        let pts: Vec<Point3> = (0..50).map(|i| Vector3::new(i as f64 * 0.1, (i % 7) as f64, 1.0)).collect();
        let r = evaluate_point_clouds(&pts, &pts, 0.01, None).unwrap();
        assert_eq!(r.accuracy, 0.0);
        assert_eq!(r.completeness, 0.0);
        assert_eq!(r.f_score, 100.0);
    }

    #[test]
    fn translated_cloud() {
        let gt: Vec<Point3> = (0..10).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        let shifted: Vec<Point3> = gt.iter().map(|p| p + Vector3::new(0.0, 0.3, 0.0)).collect();
        let r = evaluate_point_clouds(&shifted, &gt, 0.2, None).unwrap();
        assert!((r.accuracy - 0.3).abs() < 1e-12);
        assert_eq!(r.precision, 0.0);
        let r = evaluate_point_clouds(&shifted, &gt, 0.5, None).unwrap();
        assert_eq!(r.f_score, 100.0);
    }

    #[test]
    fn grid_search_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut cloud = |n| -> Vec<Point3> {
            (0..n)
                .map(|_| Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.0..0.3)))
                .collect()
        };
        let a = cloud(400);
        let b = cloud(300);
        for cutoff in [0.05, 0.2, 1.0] {
            let fast = nearest_distances(&a, &b, cutoff);
            for (q, got) in a.iter().zip(&fast) {
                let brute = b.iter().map(|p| (p - q).norm()).fold(f64::INFINITY, f64::min);
                let expect = (brute <= cutoff).then_some(brute);
                assert_eq!(*got, expect);
            }
        }
    }

    #[test]
    fn empty_cloud_errors() {
        let pts = vec![Vector3::zeros()];
        assert!(matches!(evaluate_point_clouds(&[], &pts, 0.1, None), Err(Error::EmptyCloud)));
    }
}
