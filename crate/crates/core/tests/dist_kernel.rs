use dos_lab::dist::{marcum_q1, ConditionalRateDist, RateDist};
use proptest::prelude::*;

/// Composite Simpson rule; an integrator independent of the crate's own.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    s * h / 3.0
}

/// `I0` by its power series.
fn bessel_i0(z: f64) -> f64 {
    let q = z * z / 4.0;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

fn q1_by_rician_density(a: f64, b: f64) -> f64 {
    let upper = a + b + 40.0;
    simpson(|x| x * (-(x * x + a * a) / 2.0).exp() * bessel_i0(a * x), b, upper, 20_000)
}

#[test]
fn marcum_matches_rician_integral() {
    for &(a, b) in &[(1.0, 1.0), (0.5, 2.0), (3.0, 2.5), (2.0, 4.5), (6.0, 5.0)] {
        let q = marcum_q1(a, b);
        let oracle = q1_by_rician_density(a, b);
        assert!((q - oracle).abs() < 1e-10, "Q1({a},{b}) = {q}, oracle {oracle}");
    }
}

#[test]
fn marcum_edge_cases() {
    for &b in &[0.0, 0.3, 1.0, 4.0] {
        assert!((marcum_q1(0.0, b) - (-b * b / 2.0).exp()).abs() < 1e-14);
    }
    for &a in &[0.0, 1.0, 30.0] {
        assert_eq!(marcum_q1(a, 0.0), 1.0);
    }
}

#[test]
fn head_integral_at_zero_first_level() {
    let d = ConditionalRateDist::new(1.01, 0.7);
    for &u in &[0.0, 0.2, 1.0, 5.0] {
        let closed = u - d.r_e * (1.0 - (-u / d.r_e).exp());
        assert!((d.integrate_head(u, 0.0).unwrap() - closed).abs() < 1e-9);
        assert!((d.head_mass(u, 0.0) - closed).abs() < 1e-12);
    }
    assert!(d.integrate_head(2.0, 1e6).unwrap() < 1e-12);
}

#[test]
fn tail_integral_identities() {
    let d = ConditionalRateDist::new(1.005, 1.3);
    for &theta in &[0.5, 2.0, 6.0] {
        let closed = d.r_e * (-theta / d.r_e).exp();
        assert!((d.integrate_tail(theta, 0.0).unwrap() - closed).abs() < 1e-9);
    }
    for &x in &[0.0, 0.7, 4.0, 20.0] {
        assert!((d.integrate_tail(0.0, x).unwrap() - d.mean(x)).abs() < 1e-8);
        // partition of the mean at an interior point
        let split = 0.8 * d.mean(x);
        let head_part = split - d.integrate_head(split, x).unwrap();
        assert!((head_part + d.integrate_tail(split, x).unwrap() - d.mean(x)).abs() < 1e-8);
    }
}

#[test]
fn series_and_quadrature_tails_agree() {
    let d = ConditionalRateDist::new(1.008, 4.9);
    for &x in &[0.0, 10.0, 200.0, 1500.0] {
        for &theta in &[1.0, 50.0, 300.0, 1400.0] {
            let a = d.excess_mean(theta, x);
            let b = d.integrate_tail(theta, x).unwrap();
            assert!((a - b).abs() < 1e-8 * d.mean(x), "x {x} theta {theta}: {a} vs {b}");
        }
    }
}

#[test]
fn exponential_law() {
    let r = RateDist::new(2.0);
    assert!((r.cdf(2.0) - (1.0 - (-1f64).exp())).abs() < 1e-15);
    assert!((r.excess_mean(1.0) - simpson(|u| r.survival(u), 1.0, 80.0, 20_000)).abs() < 1e-10);
}

proptest! {
    #[test]
    fn cdf_is_monotone_in_both_arguments(
        c_r in 1.0f64..1.2, r_e in 0.05f64..10.0,
        y in 0.0f64..50.0, dy in 0.0f64..5.0,
        x in 0.0f64..50.0, dx in 0.0f64..5.0,
    ) {
        let d = ConditionalRateDist::new(c_r, r_e);
        let g = d.cdf(y, x).unwrap();
        prop_assert!((0.0..=1.0).contains(&g));
        prop_assert!(d.cdf(y + dy, x).unwrap() >= g - 1e-12);
        prop_assert!(d.cdf(y, x + dx).unwrap() <= g + 1e-12);
    }

    #[test]
    fn closed_form_tail_matches_mean_split(
        c_r in 1.0f64..1.1, r_e in 0.1f64..5.0, x in 0.0f64..30.0, frac in 0.0f64..3.0,
    ) {
        let d = ConditionalRateDist::new(c_r, r_e);
        let theta = frac * d.mean(x);
        let lhs = d.excess_mean(theta, x) - d.head_mass(theta, x);
        prop_assert!((lhs - (d.mean(x) - theta)).abs() < 1e-9 * d.mean(x).max(theta));
    }
}
