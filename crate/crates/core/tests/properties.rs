use mvsdf::*;
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

fn cost_volume(d: usize, h: usize, w: usize, values: &[f64], valid: &[bool]) -> CostVolume {
    CostVolume::from_parts(d, 1, h, w, values.to_vec(), Volume::from_vec(d, h, w, valid.to_vec()), 2)
}

/// (D, H, W, cost, validity) with at least one valid cell per pixel.
fn arb_cost() -> impl Strategy<Value = (usize, usize, usize, Vec<f64>, Vec<bool>)> {
    (2usize..10, 1usize..5, 1usize..5).prop_flat_map(|(d, h, w)| {
        let n = d * h * w;
        (
            Just(d),
            Just(h),
            Just(w),
            prop::collection::vec(0.0f64..4.0, n),
            prop::collection::vec(prop::bool::weighted(0.8), n).prop_map(move |mut v| {
                v[..h * w].fill(true);
                v
            }),
        )
    })
}

fn arb_heads() -> impl Strategy<Value = (ProbabilityVolume, DistanceVolume, HypothesisSet)> {
    (2usize..10, 1usize..4, 1usize..4).prop_flat_map(|(d, h, w)| {
        let n = d * h * w;
        (
            prop::collection::vec(0.001f64..1.0, n),
            prop::collection::vec(-0.999f64..0.999, n),
            prop::collection::vec((1.0f64..20.0, 0.1f64..5.0), h * w),
        )
            .prop_map(move |(raw, s, ranges)| {
                let mut p = raw.clone();
                for pix in 0..h * w {
                    let z: f64 = (0..d).map(|k| raw[k * h * w + pix]).sum();
                    for k in 0..d {
                        p[k * h * w + pix] /= z;
                    }
                }
                let ranges = Grid::from_vec(w, h, ranges.into_iter().map(|(lo, ext)| (lo, lo + ext)).collect());
                (
                    ProbabilityVolume { data: Volume::from_vec(d, h, w, p), low_confidence: Grid::filled(w, h, false) },
                    DistanceVolume { data: Volume::from_vec(d, h, w, s), scale: 1.0 },
                    HypothesisSet::per_pixel(d, ranges).unwrap(),
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn probability_is_normalized_and_shift_invariant((d, h, w, c, valid) in arb_cost(), shift in -3.0f64..3.0, t in 0.05f64..2.0) {
        let p = probability_from_cost(&cost_volume(d, h, w, &c, &valid), t, 0).unwrap();
        let shifted: Vec<f64> = c.iter().map(|x| x + shift).collect();
        let q = probability_from_cost(&cost_volume(d, h, w, &shifted, &valid), t, 0).unwrap();
        for v in 0..h {
            for u in 0..w {
                let sum: f64 = (0..d).map(|k| *p.data.get(k, v, u)).sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
                for k in 0..d {
                    prop_assert!(*p.data.get(k, v, u) >= 0.0);
                    prop_assert!((p.data.get(k, v, u) - q.data.get(k, v, u)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn fused_depth_is_a_convex_combination_of_retained((p, s, hyps) in arb_heads(), theta in 0.01f64..=1.0) {
        let (depth, kept) = fuse_branches(&p, &s, &hyps, &FusionConfig::new(theta).unwrap());
        let (dn, h, w) = p.data.shape();
        for v in 0..h {
            for u in 0..w {
                let z = depth.value(u, v).unwrap();
                let retained: Vec<f64> = (0..dn).filter(|&k| s.data.get(k, v, u).abs() <= theta).map(|k| hyps.depth(k, u, v)).collect();
                prop_assert_eq!(*kept.get(u, v), retained.len());
                if retained.is_empty() {
                    prop_assert!((0..dn).any(|k| hyps.depth(k, u, v) == z), "fallback must be a hypothesis");
                } else {
                    let lo = retained.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = retained.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(z >= lo - 1e-9 && z <= hi + 1e-9);
                }
            }
        }
    }

    #[test]
    fn retention_never_grows_as_theta_shrinks((p, s, hyps) in arb_heads(), a in 0.01f64..=1.0, b in 0.01f64..=1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (_, k_lo) = fuse_branches(&p, &s, &hyps, &FusionConfig::new(lo).unwrap());
        let (_, k_hi) = fuse_branches(&p, &s, &hyps, &FusionConfig::new(hi).unwrap());
        prop_assert!(k_lo.as_slice().iter().zip(k_hi.as_slice()).all(|(x, y)| x <= y));
    }

    #[test]
    fn patch_search_never_beats_global(
        depths in prop::collection::vec(prop::option::weighted(0.9, 2.0f64..6.0), 6 * 5),
        (u, v) in (0usize..6, 0usize..5),
        z in 1.0f64..8.0,
        k in prop::sample::select(vec![1usize, 3, 5, 7]),
    ) {
        let cam = CameraParams::pinhole(6.0, 2.5, 2.0, Matrix3::identity(), Vector3::zeros(), 1.0, 0.1).unwrap();
        let mut map = DepthMap::from_values(6, 5, vec![1.0; 30]);
        for (i, d) in depths.iter().enumerate() {
            map.set(i % 6, i / 6, *d);
        }
        prop_assume!(map.valid_count() > 0);
        let surf = surface_points_from_depth(&map, &cam);
        let q = back_project(PixelCoord::new(u as f64, v as f64), z, &cam).unwrap();
        let g = nearest_global(&q, &surf).unwrap();
        if let Some(p) = nearest_in_patch(&q, (u, v), &surf, &SearchConfig::new(k).unwrap()).unwrap() {
            prop_assert!(p.distance >= g.distance);
            let r = k / 2;
            if g.pixel.0.abs_diff(u) <= r && g.pixel.1.abs_diff(v) <= r {
                prop_assert_eq!(p.distance, g.distance);
                prop_assert_eq!(p.pixel, g.pixel);
            }
        }
    }

    #[test]
    fn nearest_vertex_error_respects_max_edge(
        pts in prop::collection::vec(-5.0f64..5.0, 12),
    ) {
        let v = |i: usize| Vector3::new(pts[3 * i], pts[3 * i + 1], pts[3 * i + 2]);
        let Ok(tri) = Triangle::new(v(0), v(1), v(2)) else { return Ok(()) };
        let e = bound_check(&v(3), &tri);
        prop_assert!(e.error >= -1e-12);
        prop_assert!(e.final_holds);
        let max_edge = tri.edge_lengths().iter().cloned().fold(0.0, f64::max);
        prop_assert!(e.error <= max_edge + 1e-9);
    }

    #[test]
    fn metrics_are_symmetric_under_swap(
        a in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0), 1..60),
        b in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0), 1..60),
    ) {
        let to = |v: &[(f64, f64, f64)]| v.iter().map(|&(x, y, z)| Vector3::new(x, y, z)).collect::<Vec<_>>();
        let (pa, pb) = (to(&a), to(&b));
        let ab = evaluate_point_clouds(&pa, &pb, 0.5, Some(1e9)).unwrap();
        let ba = evaluate_point_clouds(&pb, &pa, 0.5, Some(1e9)).unwrap();
        prop_assert_eq!(ab.accuracy, ba.completeness);
        prop_assert_eq!(ab.completeness, ba.accuracy);
        prop_assert_eq!(ab.precision, ba.recall);
        prop_assert!((ab.overall - 0.5 * (ab.accuracy + ab.completeness)).abs() < 1e-12);
    }
}
