use chebyquad_core::measure::{Measure1D, MeasureSpec};
use chebyquad_core::quadrature::simple_approximation;
use proptest::prelude::*;

fn builtins() -> Vec<(&'static str, Measure1D)> {
    vec![
        ("uniform", Measure1D::uniform()),
        ("sigma0", Measure1D::two_interval_sigma0()),
        ("sigma_3", Measure1D::truncated_exponential(3).unwrap()),
        ("sigma_15", Measure1D::truncated_exponential(15).unwrap()),
        ("mixture", MeasureSpec::builtin("mixture").build().unwrap()),
        ("mixture_0.3", Measure1D::mixture(0.3, 0.5).unwrap()),
    ]
}

/// `min (y − x)` over grid starts `x` with `σ([x, y]) ≥ δ`, plus the breakpoints.
fn brute_inverse_modulus(m: &Measure1D, delta: f64) -> f64 {
    let (a, b) = m.support();
    let steps = ((b - a) / 1e-4).round() as usize;
    let mut starts: Vec<f64> = (0..=steps)
        .map(|i| a + (b - a) * i as f64 / steps as f64)
        .collect();
    starts.extend_from_slice(m.breakpoints());
    starts.extend(m.atoms().iter().map(|at| at.x));
    let mut best = f64::INFINITY;
    for x in starts {
        let need = m.cdf_left(x) + delta;
        if need > 1.0 + 1e-12 {
            continue;
        }
        let y = m.quantile(need.min(1.0));
        best = best.min(y - x);
    }
    best
}

#[test]
fn simple_approximation_within_one_over_n() {
    for (name, m) in builtins() {
        for n in [2usize, 7, 100, 10_000] {
            let y = simple_approximation(&m, n);
            for j in 1..=10u32 {
                let e: f64 = y.iter().map(|v| v.powi(j as i32)).sum::<f64>() / n as f64;
                let gap = (e - m.moment(j)).abs();
                assert!(gap <= 1.0 / n as f64, "{name}, n = {n}, j = {j}: {gap:e}");
            }
        }
    }
}

#[test]
fn inverse_modulus_matches_grid_scan() {
    for (name, m) in builtins() {
        for delta in [0.05, 0.2, 0.45, 0.6, 0.9] {
            let exact = m.inverse_modulus(delta).unwrap();
            let brute = brute_inverse_modulus(&m, delta);
            assert!(
                (exact - brute).abs() <= 1e-3,
                "{name}, delta = {delta}: {exact} vs {brute}"
            );
            assert!(brute >= exact - 1e-9, "{name}, delta = {delta}");
        }
    }
}

#[test]
fn uniform_moments_to_degree_twenty() {
    let m = Measure1D::uniform();
    assert_eq!(m.moment(0), 1.0);
    for j in 0..=20u32 {
        assert!((m.moment(j) - 1.0 / f64::from(j + 1)).abs() <= 1e-14);
    }
}

#[test]
fn modulus_properties_on_unit_support() {
    for (name, m) in builtins() {
        if m.support() != (0.0, 1.0) {
            continue;
        }
        for q in 2..=20 {
            let d = 1.0 / f64::from(q);
            assert!(m.inverse_modulus(d).unwrap() <= d + 1e-12, "{name}, 1/{q}");
        }
        if let Some(sup) = m.density_sup() {
            for d in [0.1, 0.3, 0.7] {
                assert!(
                    m.inverse_modulus(d).unwrap() >= d / sup - 1e-12,
                    "{name}, {d}"
                );
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn quantile_is_generalized_inverse(which in 0usize..6, p in 1e-6f64..=1.0) {
        let (_, m) = &builtins()[which];
        let y = m.quantile(p);
        prop_assert!(m.cdf(y) >= p - 1e-14);
        prop_assert!(m.cdf(y - 1e-9) < p);
    }

    #[test]
    fn modulus_is_monotone(which in 0usize..6, d1 in 0.01f64..0.99, d2 in 0.01f64..0.99) {
        let (_, m) = &builtins()[which];
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(m.inverse_modulus(lo).unwrap() <= m.inverse_modulus(hi).unwrap() + 1e-12);
    }

    #[test]
    fn truncation_caps_atoms(atom in 0.0f64..=1.0, weight in 0.05f64..0.95, eps in 0.01f64..0.99) {
        let m = Measure1D::mixture(atom, weight).unwrap();
        let t = m.truncate_atoms(eps).unwrap();
        prop_assert!((t.truncated_mass - (1.0 - (weight - eps).max(0.0))).abs() <= 1e-14);
        prop_assert!(t.normalized.max_atom() <= eps / t.truncated_mass + 1e-12);
    }

    #[test]
    fn rescale_transforms_moments(which in 0usize..6, lo in -3.0f64..3.0, len in 0.1f64..4.0) {
        let (_, m) = &builtins()[which];
        let (a, b) = m.support();
        let img = m.affine_rescale(lo, lo + len).unwrap();
        let s = len / (b - a);
        // first two moments of the pushforward x -> lo + s (x − a)
        let m1 = lo + s * (m.moment(1) - a);
        let m2 = lo * lo + 2.0 * lo * s * (m.moment(1) - a)
            + s * s * (m.moment(2) - 2.0 * a * m.moment(1) + a * a);
        prop_assert!((img.moment(1) - m1).abs() <= 1e-12 * (1.0 + m1.abs()));
        prop_assert!((img.moment(2) - m2).abs() <= 1e-11 * (1.0 + m2.abs()));
    }
}
