//! Kolmogorov–Smirnov checks of the rejection sampler.

use trunctest_core::hardinstance::{calibrate_hard_instance, embed};
use trunctest_core::linalg::{complete_basis, dot};
use trunctest_core::special::norm_cdf;
use trunctest_core::{sample_truncated, SampleBatch, TruncatedGaussianSpec, TruncationSet};

/// Asymptotic Kolmogorov survival function.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..100 {
        let k = k as f64;
        let sign = if k as i64 % 2 == 1 { 1.0 } else { -1.0 };
        s += sign * (-2.0 * k * k * lambda * lambda).exp();
    }
    (2.0 * s).clamp(0.0, 1.0)
}

fn ks_pvalue(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let sq = n.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}

fn draw(spec: &TruncatedGaussianSpec, n: usize, seed: u64) -> SampleBatch {
    sample_truncated(spec, n, seed, 100.0).unwrap()
}

#[test]
fn one_dimensional_tails() {
    for (i, &eps) in [0.01, 0.2, 0.5].iter().enumerate() {
        let set = TruncationSet::tail_with_mass(&[1.0], &[0.0], eps).unwrap();
        let b = match set.kind() {
            trunctest_core::SetKind::HalfSpaceTail { cutoff, .. } => *cutoff,
            _ => unreachable!(),
        };
        let spec = TruncatedGaussianSpec::new(vec![0.0], set).unwrap();
        let xs = draw(&spec, 20_000, 100 + i as u64).column(0);
        let p = ks_pvalue(xs, |x| if x >= b { 1.0 } else { norm_cdf(x) / (1.0 - eps) });
        assert!(p > 0.01, "eps={eps} p={p}");
    }
}

#[test]
fn ks_detects_wrong_law() {
    let spec =
        TruncatedGaussianSpec::new(vec![0.1], TruncationSet::full_space(1).unwrap()).unwrap();
    let xs = draw(&spec, 20_000, 5).column(0);
    assert!(ks_pvalue(xs, norm_cdf) < 0.01);
}

#[test]
fn hard_instance_complement_is_standard_normal() {
    let h = calibrate_hard_instance(0.1).unwrap();
    let e = embed(&h, 6, 12).unwrap();
    let batch = draw(&e.spec().unwrap(), 20_000, 13);
    let basis = complete_basis(&e.direction);
    for q in &basis[1..] {
        let proj: Vec<f64> = batch.rows().map(|x| dot(x, q)).collect();
        assert!(ks_pvalue(proj, norm_cdf) > 0.01);
    }
    let along: Vec<f64> = batch.rows().map(|x| dot(x, &e.direction)).collect();
    assert!(ks_pvalue(along.clone(), |x| h.cdf(x)) > 0.01);
    assert!(ks_pvalue(along, norm_cdf) < 0.01);
}
