//! Adaptive Gauss–Kronrod (7/15) integration on finite and infinite
//! intervals, plus a nested tensor-product rule for low-dimensional boxes.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
// Gauss weights for the odd Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and subdivision limit for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-13, rel_tol: 1e-12, max_intervals: 2000 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, libm::fabs((kron - gauss) * h))
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive integration of `f` over a finite `[a, b]`.
pub fn integrate_finite<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter("integrate_finite needs finite bounds"));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0 });
    }
    let (value, error) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut evaluations = 15;
    while total_err > opts.abs_tol.max(opts.rel_tol * libm::fabs(total)) {
        if heap.len() >= opts.max_intervals {
            return Err(Error::QuadratureDidNotConverge { estimate: total, abs_error: total_err });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            heap.push(worst);
            break;
        }
        let (lv, le) = gk15(&mut f, worst.a, mid);
        let (rv, re) = gk15(&mut f, mid, worst.b);
        evaluations += 30;
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Segment { a: mid, b: worst.b, value: rv, error: re });
    }
    // Re-sum to shed the drift accumulated by incremental updates.
    let (mut value, mut abs_error) = (0.0, 0.0);
    for s in heap.iter() {
        value += s.value;
        abs_error += s.error;
    }
    if !value.is_finite() {
        return Err(Error::QuadratureDidNotConverge { estimate: value, abs_error });
    }
    if abs_error > opts.abs_tol.max(opts.rel_tol * libm::fabs(value)) {
        return Err(Error::QuadratureDidNotConverge { estimate: value, abs_error });
    }
    Ok(QuadResult { value, abs_error, evaluations })
}

/// Integrates `f` over `[lo, hi]` where either end may be infinite.
///
/// `center` should sit near the bulk of the integrand; infinite pieces are
/// split there and mapped onto `(0, 1]` with `x = center ± (1 − t)/t`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    center: f64,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::InvalidParameter("integration bounds must satisfy lo <= hi"));
    }
    if lo == hi {
        return Ok(QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0 });
    }
    let mut pieces = [QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0 }; 2];
    if lo.is_finite() && hi.is_finite() {
        pieces[0] = integrate_finite(&mut f, lo, hi, opts)?;
    } else {
        let split = center.max(if lo.is_finite() { lo } else { f64::MIN })
            .min(if hi.is_finite() { hi } else { f64::MAX });
        pieces[0] = if lo.is_finite() {
            integrate_finite(&mut f, lo, split, opts)?
        } else {
            integrate_finite(
                |t: f64| {
                    if t <= 0.0 {
                        return 0.0;
                    }
                    let u = (1.0 - t) / t;
                    let y = f(split - u);
                    if y == 0.0 { 0.0 } else { y / (t * t) }
                },
                0.0,
                1.0,
                opts,
            )?
        };
        pieces[1] = if hi.is_finite() {
            integrate_finite(&mut f, split, hi, opts)?
        } else {
            integrate_finite(
                |t: f64| {
                    if t <= 0.0 {
                        return 0.0;
                    }
                    let u = (1.0 - t) / t;
                    let y = f(split + u);
                    if y == 0.0 { 0.0 } else { y / (t * t) }
                },
                0.0,
                1.0,
                opts,
            )?
        };
    }
    let value = pieces.iter().map(|p| p.value).sum();
    let abs_error = pieces.iter().map(|p| p.abs_error).sum();
    let evaluations = pieces.iter().map(|p| p.evaluations).sum();
    Ok(QuadResult { value, abs_error, evaluations })
}

/// One axis of a tensor-product integration domain.
#[derive(Debug, Clone, Copy)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
}

impl Axis {
    pub fn real_line(center: f64) -> Self {
        Self { lo: f64::NEG_INFINITY, hi: f64::INFINITY, center }
    }
}

/// Nested adaptive integration of `f` over the box described by `axes`.
///
/// Cost grows geometrically with the number of axes; intended for at most
/// three dimensions.
pub fn integrate_box<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    axes: &[Axis],
    opts: &QuadOptions,
) -> Result<QuadResult> {
    if axes.is_empty() {
        return Err(Error::InvalidParameter("integration box needs at least one axis"));
    }
    let mut point = alloc::vec![0.0; axes.len()];
    let mut failure = None;
    let r = nested(&mut f, axes, 0, &mut point, opts, &mut failure);
    if let Some(e) = failure {
        return Err(e);
    }
    r
}

fn nested(
    f: &mut dyn FnMut(&[f64]) -> f64,
    axes: &[Axis],
    level: usize,
    point: &mut Vec<f64>,
    opts: &QuadOptions,
    failure: &mut Option<Error>,
) -> Result<QuadResult> {
    let axis = axes[level];
    if level + 1 == axes.len() {
        return integrate(
            |x| {
                point[level] = x;
                f(point)
            },
            axis.lo,
            axis.hi,
            axis.center,
            opts,
        );
    }
    // Inner integrals are solved tighter so their noise does not stall the outer rule.
    let inner = QuadOptions {
        abs_tol: opts.abs_tol * 1e-2,
        rel_tol: opts.rel_tol * 1e-2,
        max_intervals: opts.max_intervals,
    };
    integrate(
        |x| {
            point[level] = x;
            match nested(f, axes, level + 1, point, &inner, failure) {
                Ok(r) => r.value,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        axis.lo,
        axis.hi,
        axis.center,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{norm_cdf, norm_pdf};

    #[test]
    fn polynomial_is_exact() {
        let r = integrate_finite(|x| x * x * x - 2.0 * x, -1.0, 3.0, &QuadOptions::default())
            .unwrap();
        assert!((r.value - 12.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_over_real_line() {
        let r = integrate(norm_pdf, f64::NEG_INFINITY, f64::INFINITY, 0.0, &QuadOptions::default())
            .unwrap();
        assert!((r.value - 1.0).abs() < 1e-13);
    }

    #[test]
    fn half_line_matches_cdf() {
        for &b in &[-3.0, -0.5, 0.0, 1.3, 2.326_347_874_040_841] {
            let r = integrate(norm_pdf, f64::NEG_INFINITY, b, 0.0, &QuadOptions::default())
                .unwrap();
            assert!((r.value - norm_cdf(b)).abs() < 1e-13, "b={b}");
            let r = integrate(norm_pdf, b, f64::INFINITY, 0.0, &QuadOptions::default()).unwrap();
            assert!((r.value - (1.0 - norm_cdf(b))).abs() < 1e-13, "b={b}");
        }
    }

    #[test]
    fn off_center_peak() {
        let r = integrate(
            |x| norm_pdf(x - 25.0),
            f64::NEG_INFINITY,
            f64::INFINITY,
            25.0,
            &QuadOptions::default(),
        )
        .unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_box() {
        let axes = [Axis { lo: f64::NEG_INFINITY, hi: 0.5, center: 0.0 }, Axis::real_line(0.0)];
        let r = integrate_box(
            |p| norm_pdf(p[0]) * norm_pdf(p[1]),
            &axes,
            &QuadOptions { abs_tol: 1e-11, rel_tol: 1e-11, max_intervals: 500 },
        )
        .unwrap();
        assert!((r.value - norm_cdf(0.5)).abs() < 1e-10);
    }

    #[test]
    fn rejects_inverted_bounds() {
        assert!(integrate(|x| x, 1.0, 0.0, 0.0, &QuadOptions::default()).is_err());
        assert!(integrate_box(|_| 1.0, &[], &QuadOptions::default()).is_err());
    }
}
