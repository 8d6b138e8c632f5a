mod common;

use std::f64::consts::{PI, TAU};

use common::*;
use kendall_shape::shape::{gram_matrix, inner_product, optimal_rotation};
use kendall_shape::{fp_distance, fp_kernel, to_pre_shape, LandmarkSet};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn landmarks_strategy(min: usize, max: usize) -> impl Strategy<Value = LandmarkSet> {
    (min..=max)
        .prop_flat_map(|n| prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), n))
        .prop_filter_map("degenerate", |xy| {
            let lm = LandmarkSet::from_xy(&xy).ok()?;
            to_pre_shape(&lm).ok()?;
            Some(lm)
        })
}

fn pair_strategy() -> impl Strategy<Value = (LandmarkSet, LandmarkSet)> {
    (3usize..40).prop_flat_map(|n| {
        let pts = prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), n);
        (pts.clone(), pts).prop_filter_map("degenerate", |(a, b)| {
            let a = LandmarkSet::from_xy(&a).ok()?;
            let b = LandmarkSet::from_xy(&b).ok()?;
            to_pre_shape(&a).ok()?;
            to_pre_shape(&b).ok()?;
            Some((a, b))
        })
    })
}

proptest! {
    #[test]
    fn pre_shape_is_centered_unit(lm in landmarks_strategy(3, 60)) {
        let z = to_pre_shape(&lm).unwrap();
        let sum: Complex64 = z.coords().iter().sum();
        let norm: f64 = z.coords().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(sum.norm() <= 1e-12);
        prop_assert!((norm - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn similarity_invariance(
        lm in landmarks_strategy(3, 60),
        s in 1e-3f64..1e3,
        theta in -PI..PI,
        tx in -1e3f64..1e3,
        ty in -1e3f64..1e3,
    ) {
        let moved = lm.transformed(Complex64::from_polar(s, theta), Complex64::new(tx, ty));
        let d = fp_distance(&to_pre_shape(&lm).unwrap(), &to_pre_shape(&moved).unwrap()).unwrap();
        prop_assert!(d <= 1e-9, "d = {d}");
    }

    #[test]
    fn distance_matches_brute_force((a, b) in pair_strategy()) {
        let d = fp_distance(&to_pre_shape(&a).unwrap(), &to_pre_shape(&b).unwrap()).unwrap();
        let oracle = brute_fp_distance(&xy(&a), &xy(&b));
        // Away from d = 0 both forms agree to round-off.
        let tol = if oracle > 1e-4 { 1e-12 / oracle.max(1e-2) + 1e-12 } else { 1e-7 };
        prop_assert!((d - oracle).abs() <= tol, "{d} vs {oracle}");
    }

    #[test]
    fn metric_bounds_and_symmetry((a, b) in pair_strategy(), sigma in 0.01f64..5.0) {
        let (za, zb) = (to_pre_shape(&a).unwrap(), to_pre_shape(&b).unwrap());
        let ab = fp_distance(&za, &zb).unwrap();
        let ba = fp_distance(&zb, &za).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
        prop_assert!(fp_distance(&za, &za).unwrap() <= 1e-12);
        let k = fp_kernel(&za, &zb, sigma).unwrap();
        prop_assert!(k.is_finite() && (0.0..=1.0).contains(&k));
        prop_assert!((k - (-ab * ab / (2.0 * sigma * sigma)).exp()).abs() <= 1e-15);
        prop_assert_eq!(fp_kernel(&za, &za, sigma).unwrap(), 1.0);
    }

    #[test]
    fn rotation_aligns(a in landmarks_strategy(3, 30), phi in -PI..PI) {
        let za = to_pre_shape(&a).unwrap();
        let zb = za.rotated(-phi);
        let theta = optimal_rotation(&za, &zb).unwrap();
        let diff = (theta - phi).rem_euclid(TAU);
        prop_assert!(diff.min(TAU - diff) <= 1e-9);
    }

    #[test]
    fn inner_product_is_hermitian((a, b) in pair_strategy()) {
        let (za, zb) = (to_pre_shape(&a).unwrap(), to_pre_shape(&b).unwrap());
        let ab = inner_product(&za, &zb).unwrap();
        let ba = inner_product(&zb, &za).unwrap();
        prop_assert!((ab - ba.conj()).norm() <= 1e-14);
        prop_assert!(ab.norm() <= 1.0 + 1e-12);
    }
}

#[test]
fn eighteen_landmark_pre_shape() {
    // 18 arc-length equidistant points on a 3:2 rectangle (perimeter 18).
    let corners = [(0.0, 0.0), (6.0, 0.0), (6.0, 3.0), (0.0, 3.0)];
    let pts: Vec<Complex64> = corners.iter().map(|&(x, y)| Complex64::new(x, y)).collect();
    let lm = kendall_shape::contour::polygon_landmarks(&pts, 18).unwrap();
    assert_eq!(lm.len(), 18);
    let ring: Vec<Complex64> = lm.points().to_vec();
    for k in 0..18 {
        let gap = (ring[(k + 1) % 18] - ring[k]).norm();
        assert!((gap - 1.0).abs() <= 1e-9 || gap < 1.0, "gap {gap}");
    }
    let z = to_pre_shape(&lm).unwrap();
    let sum: Complex64 = z.coords().iter().sum();
    let norm: f64 = z.coords().iter().map(|c| c.norm_sqr()).sum();
    assert!(sum.norm() <= 1e-12);
    assert!((norm - 1.0).abs() <= 1e-12);
}

#[test]
fn rotation_matches_dense_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..3 {
        let za = to_pre_shape(&random_landmarks(&mut rng, 12, 0.3)).unwrap();
        let zb = to_pre_shape(&random_landmarks(&mut rng, 12, 0.3)).unwrap();
        let theta = optimal_rotation(&za, &zb).unwrap();
        let cost = |t: f64| {
            let r = Complex64::from_polar(1.0, t);
            za.coords()
                .iter()
                .zip(zb.coords())
                .map(|(a, b)| (a - r * b).norm_sqr())
                .sum::<f64>()
        };
        let steps = 1_000_000;
        let (mut best_t, mut best_c) = (0.0, f64::INFINITY);
        for k in 0..steps {
            let t = -PI + TAU * k as f64 / steps as f64;
            let c = cost(t);
            if c < best_c {
                best_c = c;
                best_t = t;
            }
        }
        let diff = (theta - best_t).rem_euclid(TAU);
        assert!(diff.min(TAU - diff) <= TAU / steps as f64 + 1e-9);
        assert!(cost(theta) <= best_c + 1e-12);
    }
}

#[test]
fn gram_is_positive_semidefinite() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let shapes: Vec<_> = (0..50)
        .map(|_| {
            let spread = rng.random_range(0.02..0.5);
            to_pre_shape(&random_landmarks(&mut rng, 25, spread)).unwrap()
        })
        .collect();
    for sigma in [0.1, 0.5, 1.0] {
        let g = gram_matrix(&shapes, sigma).unwrap();
        for i in 0..50 {
            assert_eq!(g.get(i, i), 1.0);
            for j in 0..50 {
                assert_eq!(g.get(i, j).to_bits(), g.get(j, i).to_bits());
                let k = fp_kernel(&shapes[i], &shapes[j], sigma).unwrap();
                if i != j {
                    assert_eq!(g.get(i, j), k);
                }
            }
        }
        assert!(min_eigenvalue(50, g.as_slice()) >= -1e-8);
    }
}
