//! The two test statistics, Z = ⟨X̄, Ȳ⟩ and its centered variant
//! Z₁ = ⟨X̄ − μ′_S, Ȳ − μ′_S⟩, plus plug-in moments of a batch.
//!
//! All means and inner products use pairwise summation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linalg::SymMatrix;
use crate::sampling::SampleBatch;

const PAIRWISE_BLOCK: usize = 32;

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    pairwise_sum(&prods)
}

fn sum_rows(data: &[f64], dim: usize, out: &mut [f64]) {
    let rows = data.len() / dim;
    if rows <= PAIRWISE_BLOCK {
        for r in data.chunks_exact(dim) {
            for (o, x) in out.iter_mut().zip(r) {
                *o += x;
            }
        }
        return;
    }
    let mid = (rows / 2) * dim;
    sum_rows(&data[..mid], dim, out);
    let mut right = vec![0.0; dim];
    sum_rows(&data[mid..], dim, &mut right);
    for (o, r) in out.iter_mut().zip(right) {
        *o += r;
    }
}

/// Column means of a batch, each accumulated pairwise over rows.
pub fn column_means(batch: &SampleBatch) -> Vec<f64> {
    let mut sums = vec![0.0; batch.dim()];
    sum_rows(batch.data(), batch.dim(), &mut sums);
    let n = batch.len() as f64;
    sums.into_iter().map(|s| s / n).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatisticKind {
    Z,
    Z1,
}

impl StatisticKind {
    pub fn name(self) -> &'static str {
        match self {
            StatisticKind::Z => "Z",
            StatisticKind::Z1 => "Z1",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatisticReport {
    pub kind: StatisticKind,
    pub value: f64,
    /// Samples per half-batch.
    pub n: usize,
    pub dim: usize,
    /// μ′_S for Z₁; `None` for Z.
    pub centering: Option<Vec<f64>>,
}

impl StatisticReport {
    /// `stat_name,value,n,d`
    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.kind.name(), self.value, self.n, self.dim)
    }
}

fn check_pair(x: &SampleBatch, y: &SampleBatch) -> Result<()> {
    check_dim(x.dim(), y.dim())?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    if x.is_empty() {
        return Err(Error::InvalidParameter("statistic needs at least one sample per half"));
    }
    Ok(())
}

/// Z = ⟨X̄, Ȳ⟩ for two independent halves.
pub fn statistic_z(x: &SampleBatch, y: &SampleBatch) -> Result<StatisticReport> {
    check_pair(x, y)?;
    let value = pairwise_dot(&column_means(x), &column_means(y));
    Ok(StatisticReport { kind: StatisticKind::Z, value, n: x.len(), dim: x.dim(), centering: None })
}

/// Z₁ = ⟨X̄ − μ′_S, Ȳ − μ′_S⟩.
pub fn statistic_z1(x: &SampleBatch, y: &SampleBatch, mu_s_null: &[f64]) -> Result<StatisticReport> {
    check_pair(x, y)?;
    check_dim(x.dim(), mu_s_null.len())?;
    let cx: Vec<f64> = column_means(x).iter().zip(mu_s_null).map(|(a, m)| a - m).collect();
    let cy: Vec<f64> = column_means(y).iter().zip(mu_s_null).map(|(a, m)| a - m).collect();
    Ok(StatisticReport {
        kind: StatisticKind::Z1,
        value: pairwise_dot(&cx, &cy),
        n: x.len(),
        dim: x.dim(),
        centering: Some(mu_s_null.to_vec()),
    })
}

/// Sample mean and unbiased (n − 1) covariance.
pub fn empirical_moments(batch: &SampleBatch) -> Result<(Vec<f64>, SymMatrix)> {
    if batch.len() < 2 {
        return Err(Error::InvalidParameter("empirical moments need at least two samples"));
    }
    let d = batch.dim();
    let mean = column_means(batch);
    let mut acc = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for row in batch.rows() {
        for (c, (x, m)) in centered.iter_mut().zip(row.iter().zip(&mean)) {
            *c = x - m;
        }
        for i in 0..d {
            let ci = centered[i];
            let dst = &mut acc[i * d + i..(i + 1) * d];
            for (a, cj) in dst.iter_mut().zip(&centered[i..]) {
                *a += ci * cj;
            }
        }
    }
    let denom = (batch.len() - 1) as f64;
    let cov = SymMatrix::from_row_major(d, acc.into_iter().map(|x| x / denom).collect())
        .expect("square");
    Ok((mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(rows: &[&[f64]]) -> SampleBatch {
        let dim = rows[0].len();
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        SampleBatch::from_rows(data, dim, 0, rows.len()).unwrap()
    }

    #[test]
    fn pairwise_sum_is_accurate() {
        let xs = vec![0.1; 1_000_000];
        assert!((pairwise_sum(&xs) - 100_000.0).abs() < 1e-8);
    }

    #[test]
    fn z_of_orthogonal_means() {
        let x = batch(&[&[1.0, 0.0]]);
        let y = batch(&[&[0.0, 1.0]]);
        assert_eq!(statistic_z(&x, &y).unwrap().value, 0.0);
    }

    #[test]
    fn z_direct_dot() {
        let x = batch(&[&[0.5, 0.5], &[0.0, 1.0], &[1.0, 0.0]]);
        let y = batch(&[&[0.5, 0.5], &[0.5, 0.5], &[0.5, 0.5]]);
        let r = statistic_z(&x, &y).unwrap();
        assert!((r.value - 0.5).abs() < 1e-15);
        assert_eq!(r.csv_row(), format!("Z,{},3,2", r.value));
    }

    #[test]
    fn z1_exact_centering_and_reduction() {
        let x = batch(&[&[0.2, -0.4], &[0.4, 0.0]]);
        let y = batch(&[&[0.3, -0.2], &[0.3, -0.2]]);
        let m = column_means(&x);
        let z1 = statistic_z1(&x, &x, &m).unwrap();
        assert_eq!(z1.value, 0.0);
        let z = statistic_z(&x, &y).unwrap().value;
        assert_eq!(statistic_z1(&x, &y, &[0.0, 0.0]).unwrap().value, z);
    }

    #[test]
    fn mismatches_are_errors() {
        let x = batch(&[&[0.0, 0.0]]);
        let y = batch(&[&[0.0, 0.0, 0.0]]);
        assert!(statistic_z(&x, &y).is_err());
        let y2 = batch(&[&[0.0, 0.0], &[1.0, 1.0]]);
        assert!(statistic_z(&x, &y2).is_err());
        assert!(statistic_z1(&x, &x, &[0.0]).is_err());
    }

    #[test]
    fn moments_by_hand() {
        let b = batch(&[&[0.0, 0.0], &[2.0, 0.0]]);
        let (mean, cov) = empirical_moments(&b).unwrap();
        assert_eq!(mean, vec![1.0, 0.0]);
        assert_eq!(cov.as_slice(), &[2.0, 0.0, 0.0, 0.0]);
        assert!(empirical_moments(&batch(&[&[1.0]])).is_err());
    }
}
