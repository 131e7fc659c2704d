use chebyquad_core::random::{
    cube_multimoments, empirical_density_probe, moment_statistics, small_ball_from_deviations,
    small_ball_probability, sup_deviations, wilson_interval,
};
use proptest::prelude::*;

#[test]
fn small_ball_analytic_case() {
    // n = 1, k = 1, d = 1: the event is |x| <= eps, probability eps
    let est = small_ball_probability(1, 1, 1, 0.3, 100_000, 2024);
    assert!(est.ci_low <= 0.3 && 0.3 <= est.ci_high, "{est:?}");
    assert!(est.ci_low <= est.estimate && est.estimate <= est.ci_high);
}

#[test]
fn unbiased_within_four_standard_errors() {
    let stats = moment_statistics(10, 3, 2, 10_000, 77);
    assert_eq!(stats.mean.len(), cube_multimoments(3, 2).len());
    for (j, z) in stats.standard_scores().iter().enumerate() {
        assert!(*z <= 4.0, "coordinate {j}: {z}");
    }
}

#[test]
fn deviations_scale_like_inverse_sqrt_n() {
    let a = moment_statistics(1000, 2, 1, 4000, 5);
    let b = moment_statistics(4000, 2, 1, 4000, 6);
    for (sa, sb) in a.std_dev.iter().zip(&b.std_dev) {
        let ratio = sa / sb;
        assert!((ratio / 2.0 - 1.0).abs() <= 0.1, "ratio {ratio}");
    }
}

#[test]
fn reruns_are_bit_identical() {
    let a = small_ball_probability(20, 2, 2, 1.0, 500, 9);
    let b = small_ball_probability(20, 2, 2, 1.0, 500, 9);
    assert_eq!(a, b);
    assert_eq!(
        sup_deviations(7, 3, 3, 50, 1),
        sup_deviations(7, 3, 3, 50, 1)
    );
}

#[test]
fn density_near_origin_matches_gaussian_limit() {
    let est = empirical_density_probe(200, 1, 1, 200_000, 0.2, 31);
    let limit = (3.0 / (2.0 * std::f64::consts::PI)).sqrt();
    assert!(
        (est.estimate / limit - 1.0).abs() <= 0.1,
        "{}",
        est.estimate
    );
}

#[test]
fn density_probe_positive_for_degree_two() {
    let est = empirical_density_probe(50, 2, 1, 20_000, 0.3, 4);
    assert!(est.hit_count > 0 && est.estimate > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn monotone_in_eps_under_common_numbers(seed in any::<u64>(), e1 in 0.0f64..3.0, e2 in 0.0f64..3.0) {
        let dev = sup_deviations(5, 2, 1, 200, seed);
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let a = small_ball_from_deviations(&dev, 5, 2, 1, lo, seed);
        let b = small_ball_from_deviations(&dev, 5, 2, 1, hi, seed);
        prop_assert!(a.hit_count <= b.hit_count);
    }

    #[test]
    fn wilson_contains_estimate(reps in 1u64..10_000, frac in 0.0f64..=1.0) {
        let hits = ((reps as f64) * frac).floor() as u64;
        let (lo, hi) = wilson_interval(hits, reps);
        let p = hits as f64 / reps as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-15 && p <= hi + 1e-15 && hi <= 1.0);
        prop_assert_eq!(lo == 0.0, hits == 0);
    }
}
