//! Property tests over randomized admissible parameters.

use affinekit::{
    char_fn, dbeta_coefficients, riccati_h, sample_exact, sample_path_euler, transition_density,
    transition_rep, validate_params, PathGrid, StreamKey,
};
use proptest::prelude::*;

fn params_strategy() -> impl Strategy<Value = affinekit::AffineParams> {
    (0.05f64..8.0, -3.0f64..3.0, 0.0f64..4.0)
        .prop_map(|(alpha, beta, b)| validate_params(alpha, beta, b).unwrap())
}

proptest! {
    #[test]
    fn cf_is_normalized_bounded_and_symmetric(
        p in params_strategy(),
        t in 0.0f64..5.0,
        x in 0.0f64..5.0,
        theta in -50.0f64..50.0,
    ) {
        let phi = char_fn(t, theta, x, &p);
        prop_assert!(phi.norm() <= 1.0 + 1e-13);
        prop_assert_eq!(char_fn(t, 0.0, x, &p), num_complex::Complex64::new(1.0, 0.0));
        let mirrored = char_fn(t, -theta, x, &p);
        prop_assert!((mirrored - phi.conj()).norm() <= 1e-13);
    }

    #[test]
    fn riccati_initial_condition(p in params_strategy(), theta in -50.0f64..50.0) {
        let h = riccati_h(0.0, theta, &p);
        prop_assert_eq!(h, num_complex::Complex64::new(0.0, theta));
    }

    #[test]
    fn transition_rep_matches_cf(
        p in params_strategy(),
        t in 0.01f64..4.0,
        x in 0.0f64..4.0,
        theta in -20.0f64..20.0,
    ) {
        let rep = transition_rep(t, x, &p).unwrap();
        let gap = (rep.transform(theta) - char_fn(t, theta, x, &p)).norm();
        prop_assert!(gap <= 1e-11, "gap {gap}");
    }

    #[test]
    fn density_is_nonnegative(
        p in params_strategy(),
        t in 0.01f64..4.0,
        x in 0.0f64..4.0,
        y in -2.0f64..40.0,
    ) {
        let rep = transition_rep(t, x, &p).unwrap();
        let d = transition_density(y, &rep);
        prop_assert!(d >= 0.0 && d.is_finite());
        if y <= 0.0 {
            prop_assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn exact_draws_stay_on_the_half_line(
        p in params_strategy(),
        t in 0.01f64..4.0,
        x in 0.0f64..4.0,
        seed in any::<u64>(),
    ) {
        let mut rng = StreamKey::new(seed, 0).rng();
        let draw = sample_exact(t, x, &p, &mut rng).unwrap();
        prop_assert!(draw >= 0.0 && draw.is_finite());
    }

    #[test]
    fn euler_reports_nonnegative_paths(
        p in params_strategy(),
        x in 0.0f64..4.0,
        seed in any::<u64>(),
        steps in 1usize..64,
    ) {
        let times = PathGrid::uniform_times(1.0, steps);
        let mut rng = StreamKey::new(seed, 1).rng();
        let path = sample_path_euler(&times, x, &p, &mut rng).unwrap();
        prop_assert_eq!(path.values.len(), steps + 1);
        prop_assert!(path.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn dbeta_weights_always_cancel(
        p in params_strategy(),
        t in 0.01f64..4.0,
        x in 0.01f64..4.0,
    ) {
        let w = dbeta_coefficients(t, x, &p);
        let scale = w.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(w.iter().sum::<f64>().abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn domain_rejections(alpha in -2.0f64..0.0, b in -2.0f64..-1e-9) {
        prop_assert!(validate_params(alpha, 0.0, 1.0).is_err());
        prop_assert!(validate_params(1.0, 0.0, b).is_err());
    }
}
