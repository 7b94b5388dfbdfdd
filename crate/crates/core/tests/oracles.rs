//! Library values against oracles written independently of the library:
//! erfc and moments by compensated composite Simpson on a fine grid, and
//! quantiles and calibrations by bisection.

use std::f64::consts::PI;

use trunctest_core::hardinstance::{
    calibrate_hard_instance, chi_square_closed_form, chi_square_quadrature, EPS_LADDER,
};
use trunctest_core::special::{erf_inv, inverse_mills, norm_cdf, norm_quantile, upper_tail_quantile};
use trunctest_core::TruncationSet;

/// `erfc(x) = 2/√π · e^{−x²} ∫_0^∞ e^{−2xs − s²} ds`, the integral by
/// composite Simpson on `[0, 9]`.
fn oracle_erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - oracle_erfc(-x);
    }
    let tail = simpson(|s| (-2.0 * x * s - s * s).exp(), 0.0, 9.0, 200_000);
    2.0 / PI.sqrt() * (-x * x).exp() * tail
}

fn oracle_cdf(x: f64) -> f64 {
    0.5 * oracle_erfc(-x / std::f64::consts::SQRT_2)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    // Neumaier-compensated sum of the weighted ordinates.
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for i in 0..=panels {
        let w = if i == 0 || i == panels { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let term = w * f(a + i as f64 * h);
        let t = s + term;
        c += if s.abs() >= term.abs() { (s - t) + term } else { (term - t) + s };
        s = t;
    }
    (s + c) * h / 3.0
}

fn oracle_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[test]
fn cdf_matches_integral_oracle() {
    let mut x = -12.0;
    while x <= 8.0 {
        let (a, b) = (norm_cdf(x), oracle_cdf(x));
        assert!((a - b).abs() <= 1e-14 * b.max(1e-300) + 1e-16, "x={x}: {a} vs {b}");
        x += 0.173;
    }
}

#[test]
fn quantile_matches_bisection() {
    for &p in &[1e-12, 1e-6, 0.001, 0.025, 0.2, 0.5, 0.77, 0.99, 0.999_99] {
        let want = bisect(|x| oracle_cdf(x) - p, -20.0, 20.0);
        assert!((norm_quantile(p) - want).abs() <= 1e-12 * want.abs().max(1.0), "p={p}");
    }
}

#[test]
fn tail_quantile_is_root_of_erf_identity() {
    for &eps in &EPS_LADDER {
        let want = bisect(|x| oracle_erfc(x / std::f64::consts::SQRT_2) / 2.0 - eps, 0.0, 10.0);
        assert!((upper_tail_quantile(eps) - want).abs() <= 1e-12);
        let y = 1.0 - 2.0 * eps;
        let x = bisect(|x| (1.0 - oracle_erfc(x)) - y, 0.0, 6.0);
        assert!((erf_inv(y) - x).abs() <= 1e-12);
    }
}

#[test]
fn hard_instance_alpha_by_bisection() {
    // Solve E[N(α, 1, (−∞, α + q])] = 0 for α without the closed form.
    for &eps in &EPS_LADDER {
        let q = bisect(|x| 1.0 - oracle_cdf(x) - eps, 0.0, 10.0);
        let mean = |a: f64| a - oracle_pdf(q) / oracle_cdf(q);
        let alpha = bisect(mean, 0.0, 2.0);
        let h = calibrate_hard_instance(eps).unwrap();
        assert!((h.alpha - alpha).abs() <= 1e-12, "eps={eps}");
        assert!((h.b - (alpha + q)).abs() <= 1e-12);
    }
}

#[test]
fn chi_square_by_simpson() {
    for &eps in &EPS_LADDER {
        let h = calibrate_hard_instance(eps).unwrap();
        let pa = |x: f64| oracle_pdf(x - h.alpha) / (1.0 - eps);
        let integral = simpson(|x| pa(x) * pa(x) / oracle_pdf(x), -14.0, h.b, 400_000);
        let oracle = integral - 1.0;
        let closed = chi_square_closed_form(&h);
        assert!((closed - oracle).abs() <= 1e-10, "eps={eps}: {closed} vs {oracle}");
        let quad = chi_square_quadrature(&h, 1e-10).unwrap();
        assert!((quad - oracle).abs() <= 1e-10);
    }
}

#[test]
fn half_space_moments_by_simpson() {
    for &(b, m) in &[(0.5, 0.0), (1.3, 0.4), (-0.7, -0.2), (2.5, 1.0)] {
        let t = b - m;
        let z = simpson(|x| oracle_pdf(x - m), m - 14.0, b, 200_000);
        let first = simpson(|x| x * oracle_pdf(x - m), m - 14.0, b, 200_000) / z;
        let second = simpson(|x| x * x * oracle_pdf(x - m), m - 14.0, b, 200_000) / z;
        let set = TruncationSet::half_space_tail(vec![1.0], b).unwrap();
        assert!((set.analytic_mass(&[m]).unwrap() - z).abs() < 1e-12);
        let mean = set.analytic_truncated_mean(&[m]).unwrap()[0];
        assert!((mean - first).abs() < 1e-11, "b={b} m={m}");
        let var = set.analytic_truncated_covariance(&[m]).unwrap().get(0, 0);
        assert!((var - (second - first * first)).abs() < 1e-10);
        assert!((m - inverse_mills(t) - first).abs() < 1e-11);
    }
}
