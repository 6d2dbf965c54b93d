use proptest::prelude::*;
use wpar_core::flattening::{phi_inverse, phi_map, BoundaryChart, ChartKind};
use wpar_core::geometry::{height, height_inverse, quasi_distance, SpaceTimePoint};
use wpar_core::oscillation::theta_beta_ms;
use wpar_core::solver::thomas;
use wpar_core::weights::{ball_average, Region, Weight};

fn line(alpha: f64) -> Weight {
    Weight::power(alpha, vec![0.0], Region::whole(1)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn flattening_round_trip(delta in 0.0..0.99f64, base in -1.0..1.0f64, width in 0.05..2.0f64, x in -5.0..5.0f64, y in -5.0..5.0f64) {
        let c = BoundaryChart::new(delta, ChartKind::Cup { base, width }).unwrap();
        let back = phi_inverse(&c, phi_map(&c, [x, y]));
        prop_assert_eq!(back[0], x);
        prop_assert!((back[1] - y).abs() <= 4.0 * f64::EPSILON * (1.0 + y.abs()));
        prop_assert!(c.dphi(x).abs() <= delta * (1.0 + 1e-15));
    }

    #[test]
    fn quasi_distance_is_symmetric(alpha in -0.5..1.0f64, x in -1.0..1.0f64, t in -1.0..1.0f64, x0 in -1.0..1.0f64, t0 in -1.0..1.0f64) {
        let w = line(alpha);
        let (a, b) = (SpaceTimePoint::new(vec![x], t), SpaceTimePoint::new(vec![x0], t0));
        let d1 = quasi_distance(&w, &a, &b).unwrap();
        let d2 = quasi_distance(&w, &b, &a).unwrap();
        prop_assert_eq!(d1, d2);
        prop_assert!(d1 >= (x - x0).abs() * (1.0 - 1e-12));
    }

    #[test]
    fn height_inverse_undoes_height(alpha in -0.5..1.5f64, x0 in -1.0..1.0f64, r in 1e-3..3.0f64) {
        let w = line(alpha);
        let h = height(&w, &[x0], r).unwrap();
        let back = height_inverse(&w, &[x0], h).unwrap();
        prop_assert!((back - r).abs() <= 1e-8 * r);
    }

    #[test]
    fn oscillation_is_nonnegative_and_scale_free(alpha in -0.8..0.8f64, x0 in -1.0..1.0f64, r in 1e-3..2.0f64, c in 1e-3..1e3f64) {
        let w = line(alpha);
        let th = theta_beta_ms(&w, &[x0], r).unwrap();
        prop_assert!(th >= 0.0);
        let scaled = theta_beta_ms(&w.scaled(c).unwrap(), &[x0], r).unwrap();
        prop_assert!((th - scaled).abs() <= 1e-10 * (1.0 + th));
        // Jensen: (w)_B (w^{-1})_B >= 1
        let prod = ball_average(&w, &[x0], r, 1.0).unwrap() * ball_average(&w, &[x0], r, -1.0).unwrap();
        prop_assert!(prod >= 1.0 - 1e-12);
    }

    #[test]
    fn thomas_solves_dominant_systems(n in 2usize..40, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let lower: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..0.0)).collect();
        let upper: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..0.0)).collect();
        let diag: Vec<f64> = (0..n).map(|i| 2.5 + lower[i].abs() + upper[i].abs()).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 { s += lower[i] * x[i - 1]; }
                if i + 1 < n { s += upper[i] * x[i + 1]; }
                s
            })
            .collect();
        thomas(&lower, &diag, &upper, &mut rhs, 0).unwrap();
        for (g, w) in rhs.iter().zip(&x) {
            prop_assert!((g - w).abs() < 1e-12);
        }
    }
}
