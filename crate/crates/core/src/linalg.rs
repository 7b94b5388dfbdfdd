//! Small dense helpers: vector norms and a symmetric matrix with a cyclic
//! Jacobi eigensolver. Dimensions here are at most a few hundred.

use alloc::vec;
use alloc::vec::Vec;

use crate::statistics::pairwise_sum;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Returns `a / ‖a‖`, or `None` for the zero vector.
pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    Some(a.iter().map(|x| x / n).collect())
}

pub fn unit_vector(dim: usize, axis: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[axis] = 1.0;
    v
}

/// Orthonormal basis whose first vector is `first` (assumed unit norm).
pub fn complete_basis(first: &[f64]) -> Vec<Vec<f64>> {
    let d = first.len();
    let mut basis: Vec<Vec<f64>> = vec![first.to_vec()];
    for axis in 0..d {
        if basis.len() == d {
            break;
        }
        let mut cand = unit_vector(d, axis);
        // Two Gram–Schmidt passes for stability.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&cand, b);
                for (x, y) in cand.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        if norm(&cand) > 1e-8 {
            basis.push(normalized(&cand).expect("non-zero"));
        }
    }
    basis
}

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    /// Builds from row-major data; the upper triangle is mirrored into the lower.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Option<Self> {
        if data.len() != dim * dim {
            return None;
        }
        let mut m = Self { dim, data };
        for i in 0..dim {
            for j in 0..i {
                m.data[i * dim + j] = m.data[j * dim + i];
            }
        }
        Some(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        let sq: Vec<f64> = self.data.iter().map(|x| x * x).collect();
        libm::sqrt(pairwise_sum(&sq))
    }

    /// `‖self − I‖_F`
    pub fn frobenius_distance_to_identity(&self) -> f64 {
        let d = self.dim;
        let sq: Vec<f64> = self
            .data
            .iter()
            .enumerate()
            .map(|(k, x)| {
                let e = if k / d == k % d { x - 1.0 } else { *x };
                e * e
            })
            .collect();
        libm::sqrt(pairwise_sum(&sq))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            acc += v[i] * dot(&self.data[i * d..(i + 1) * d], v);
        }
        acc
    }

    /// Eigen-decomposition by cyclic Jacobi rotations.
    ///
    /// Returns eigenvalues in ascending order and the matching unit
    /// eigenvectors.
    pub fn symmetric_eigen(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let d = self.dim;
        let mut a = self.data.clone();
        let mut v = Self::identity(d).data;
        let scale: f64 = a.iter().map(|x| x * x).sum::<f64>();
        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..d {
                for j in (i + 1)..d {
                    off += a[i * d + j] * a[i * d + j];
                }
            }
            if off <= 1e-30 * scale || off == 0.0 {
                break;
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    let apq = a[p * d + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a[p * d + p];
                    let aqq = a[q * d + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = libm::copysign(1.0, theta)
                        / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0));
                    let c = 1.0 / libm::sqrt(t * t + 1.0);
                    let s = t * c;
                    for k in 0..d {
                        let akp = a[k * d + p];
                        let akq = a[k * d + q];
                        a[k * d + p] = c * akp - s * akq;
                        a[k * d + q] = s * akp + c * akq;
                    }
                    for k in 0..d {
                        let apk = a[p * d + k];
                        let aqk = a[q * d + k];
                        a[p * d + k] = c * apk - s * aqk;
                        a[q * d + k] = s * apk + c * aqk;
                    }
                    for k in 0..d {
                        let vkp = v[k * d + p];
                        let vkq = v[k * d + q];
                        v[k * d + p] = c * vkp - s * vkq;
                        v[k * d + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| a[i * d + i].total_cmp(&a[j * d + j]));
        let values = order.iter().map(|&i| a[i * d + i]).collect();
        let vectors = order.iter().map(|&i| (0..d).map(|k| v[k * d + i]).collect()).collect();
        (values, vectors)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.symmetric_eigen().0[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthonormal() {
        let v = normalized(&[0.3, -1.0, 2.0, 0.5]).unwrap();
        let b = complete_basis(&v);
        assert_eq!(b.len(), 4);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&b[i], &b[j]) - expect).abs() < 1e-12);
            }
        }
        assert_eq!(b[0], v);
    }

    #[test]
    fn jacobi_two_by_two() {
        let m = SymMatrix::from_row_major(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let (vals, vecs) = m.symmetric_eigen();
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
        assert!((vecs[0][0] + vecs[0][1]).abs() < 1e-12);
    }

    #[test]
    fn jacobi_reconstructs() {
        let d = 6;
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            for j in i..d {
                data[i * d + j] = ((i * 7 + j * 3) % 5) as f64 - 1.5 + if i == j { 4.0 } else { 0.0 };
            }
        }
        let m = SymMatrix::from_row_major(d, data).unwrap();
        let (vals, vecs) = m.symmetric_eigen();
        for (lam, v) in vals.iter().zip(&vecs) {
            assert!((m.quadratic_form(v) - lam).abs() < 1e-10);
            assert!((norm(v) - 1.0).abs() < 1e-12);
        }
        assert!((vals.iter().sum::<f64>() - m.trace()).abs() < 1e-10);
    }

    #[test]
    fn frobenius_gap_of_identity_is_zero() {
        assert_eq!(SymMatrix::identity(5).frobenius_distance_to_identity(), 0.0);
        let mut m = SymMatrix::identity(2);
        m.set(0, 1, 0.5);
        assert!((m.frobenius_distance_to_identity() - libm::sqrt(0.5)).abs() < 1e-15);
    }
}
