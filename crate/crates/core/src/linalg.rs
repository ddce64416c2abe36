//! Small dense vectors and matrices.
//!
//! Everything here is sized for constitutive laws in two to a handful of
//! dimensions, so storage is inline (`SmallVec`) and the spectral routines are
//! exact for `n = 2` and cyclic Jacobi otherwise.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};

pub mod dd;
pub mod inequalities;

type Buf = SmallVec<[f64; 4]>;
type MatBuf = SmallVec<[f64; 16]>;

/// A vector in `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VecN(Buf);

impl VecN {
    pub fn zeros(n: usize) -> Self {
        VecN(SmallVec::from_elem(0.0, n))
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        VecN(SmallVec::from_slice(xs))
    }

    /// Unit vector `e_i` in `R^n`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[i] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }

    pub fn dot(&self, other: &VecN) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        match self.0.len() {
            1 => self.0[0].abs(),
            2 => self.0[0].hypot(self.0[1]),
            _ => self.dot(self).sqrt(),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn scale(&self, s: f64) -> VecN {
        VecN(self.0.iter().map(|x| x * s).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &VecN) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += s * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl Index<usize> for VecN {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for VecN {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl<'a> Add<&'a VecN> for &'a VecN {
    type Output = VecN;
    fn add(self, rhs: &VecN) -> VecN {
        VecN(self.0.iter().zip(rhs.0.iter()).map(|(a, b)| a + b).collect())
    }
}

impl<'a> Sub<&'a VecN> for &'a VecN {
    type Output = VecN;
    fn sub(self, rhs: &VecN) -> VecN {
        VecN(self.0.iter().zip(rhs.0.iter()).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &VecN {
    type Output = VecN;
    fn neg(self) -> VecN {
        VecN(self.0.iter().map(|a| -a).collect())
    }
}

impl From<Vec<f64>> for VecN {
    fn from(v: Vec<f64>) -> Self {
        VecN(SmallVec::from_vec(v))
    }
}

impl<const N: usize> From<[f64; N]> for VecN {
    fn from(v: [f64; N]) -> Self {
        VecN::from_slice(&v)
    }
}

/// A square `n x n` matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MatN {
    n: usize,
    data: MatBuf,
}

impl MatN {
    pub fn zeros(n: usize) -> Self {
        MatN { n, data: SmallVec::from_elem(0.0, n * n) }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, 1.0)
    }

    /// `s * I_n`
    pub fn scalar(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = s;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    /// Builds a matrix from row-major rows. Fails unless the rows form a
    /// non-empty square array.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Dimension("matrix must have at least one row".into()));
        }
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            for (j, &x) in row.iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        Ok(m)
    }

    pub fn from_array<const N: usize>(rows: [[f64; N]; N]) -> Self {
        let mut m = Self::zeros(N);
        for i in 0..N {
            for j in 0..N {
                m[(i, j)] = rows[i][j];
            }
        }
        m
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.data[i * self.n..(i + 1) * self.n].to_vec()).collect()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    pub fn transpose(&self) -> MatN {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `(A + A^T) / 2`
    pub fn sym_part(&self) -> MatN {
        let mut s = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                s[(i, j)] = 0.5 * (self[(i, j)] + self[(j, i)]);
            }
        }
        s
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn mul_vec(&self, x: &VecN) -> VecN {
        debug_assert_eq!(self.n, x.dim());
        let n = self.n;
        let mut y = VecN::zeros(n);
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            y[i] = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        }
        y
    }

    pub fn mul_mat(&self, other: &MatN) -> MatN {
        let n = self.n;
        let mut c = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    c[(i, j)] += a * other[(k, j)];
                }
            }
        }
        c
    }

    /// `x^T A y`
    pub fn bilinear(&self, x: &VecN, y: &VecN) -> f64 {
        x.dot(&self.mul_vec(y))
    }

    pub fn scale(&self, s: f64) -> MatN {
        MatN { n: self.n, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest entry of `|A - A^T|`.
    pub fn asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                m = m.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        m
    }

    /// Symmetric up to `1e-12 * (1 + |A|)`.
    pub fn is_symmetric(&self) -> bool {
        self.asymmetry() <= SYMMETRY_RTOL * (1.0 + frobenius_norm(self))
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting; `None` when
    /// a pivot falls below `1e-14` times the largest entry.
    pub fn inverse(&self) -> Option<MatN> {
        let n = self.n;
        let scale = self.max_abs();
        if scale == 0.0 {
            return None;
        }
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs())).unwrap();
            if a[(piv, col)].abs() <= 1e-14 * scale {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(piv * n + j, col * n + j);
                    inv.data.swap(piv * n + j, col * n + j);
                }
            }
            let d = a[(col, col)];
            for j in 0..n {
                a[(col, j)] /= d;
                inv[(col, j)] /= d;
            }
            for i in 0..n {
                if i == col {
                    continue;
                }
                let f = a[(i, col)];
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a[(i, j)] -= f * a[(col, j)];
                    inv[(i, j)] -= f * inv[(col, j)];
                }
            }
        }
        Some(inv)
    }

    /// Solves `A x = b`; `None` if `A` is numerically singular.
    pub fn solve(&self, b: &VecN) -> Option<VecN> {
        self.inverse().map(|inv| inv.mul_vec(b))
    }
}

pub(crate) const SYMMETRY_RTOL: f64 = 1e-12;

impl Index<(usize, usize)> for MatN {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for MatN {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl<'a> Add<&'a MatN> for &'a MatN {
    type Output = MatN;
    fn add(self, rhs: &MatN) -> MatN {
        MatN { n: self.n, data: self.data.iter().zip(rhs.data.iter()).map(|(a, b)| a + b).collect() }
    }
}

impl<'a> Sub<&'a MatN> for &'a MatN {
    type Output = MatN;
    fn sub(self, rhs: &MatN) -> MatN {
        MatN { n: self.n, data: self.data.iter().zip(rhs.data.iter()).map(|(a, b)| a - b).collect() }
    }
}

impl Mul<&VecN> for &MatN {
    type Output = VecN;
    fn mul(self, rhs: &VecN) -> VecN {
        self.mul_vec(rhs)
    }
}

impl Serialize for MatN {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for MatN {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        MatN::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// `|A| = (sum a_ij^2)^(1/2)`
pub fn frobenius_norm(a: &MatN) -> f64 {
    a.data.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest singular value `max_{|x|=1} |Ax|`.
///
/// Closed form for `n = 2`; otherwise the square root of the largest
/// eigenvalue of `A^T A` from a Jacobi sweep.
pub fn operator_norm(a: &MatN) -> f64 {
    match a.dim() {
        1 => a[(0, 0)].abs(),
        2 => singular_values_2x2(a).0,
        _ => {
            let ata = a.transpose().mul_mat(a);
            let eig = symmetric_eigen(&ata);
            eig.values.last().copied().unwrap_or(0.0).max(0.0).sqrt()
        }
    }
}

/// Singular values `(s_max, s_min)` of a 2x2 matrix.
pub fn singular_values_2x2(a: &MatN) -> (f64, f64) {
    debug_assert_eq!(a.dim(), 2);
    let (p, q, r, s) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    // s_max + s_min and s_max - s_min from the half-sum/half-difference form
    let e = 0.5 * (p + s);
    let f = 0.5 * (p - s);
    let g = 0.5 * (r + q);
    let h = 0.5 * (r - q);
    let big = e.hypot(h);
    let small = f.hypot(g);
    (big + small, (big - small).abs())
}

/// `lambda_min((A + A^T) / 2)`, the best constant in `u^T A u >= c |u|^2`.
pub fn symmetric_part_min_eig(a: &MatN) -> f64 {
    let s = a.sym_part();
    match s.dim() {
        1 => s[(0, 0)],
        2 => sym_eigen_2x2(&s).0,
        _ => symmetric_eigen(&s).values[0],
    }
}

/// `lambda_max((A + A^T) / 2)`
pub fn symmetric_part_max_eig(a: &MatN) -> f64 {
    let s = a.sym_part();
    match s.dim() {
        1 => s[(0, 0)],
        2 => sym_eigen_2x2(&s).1,
        _ => *symmetric_eigen(&s).values.last().unwrap(),
    }
}

/// Eigenvalues `(min, max)` of a symmetric 2x2 matrix.
fn sym_eigen_2x2(s: &MatN) -> (f64, f64) {
    let (a, b, d) = (s[(0, 0)], s[(0, 1)], s[(1, 1)]);
    let mean = 0.5 * (a + d);
    let rad = (0.5 * (a - d)).hypot(b);
    (mean - rad, mean + rad)
}

/// Eigen-decomposition of a symmetric matrix. Eigenvalues ascend;
/// `vectors` holds the matching eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: MatN,
}

/// Cyclic Jacobi on the symmetric part of `s`.
pub fn symmetric_eigen(s: &MatN) -> SymmetricEigen {
    let n = s.dim();
    let mut a = s.sym_part();
    let mut v = MatN::identity(n);
    let scale = frobenius_norm(&a).max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = MatN::zeros(n);
    for (col, &i) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, col)] = v[(k, i)];
        }
    }
    SymmetricEigen { values, vectors }
}

/// Principal square root of a symmetric positive definite matrix.
/// Fails when the smallest eigenvalue of the symmetrized input is `<= 1e-12`.
pub fn spd_sqrt(a: &MatN) -> Result<MatN> {
    let eig = symmetric_eigen(a);
    let lmin = eig.values[0];
    if lmin <= 1e-12 {
        return Err(Error::InvalidLaw(format!("matrix is not positive definite (lambda_min = {lmin:e})")));
    }
    let n = a.dim();
    let mut r = MatN::zeros(n);
    for (k, &lam) in eig.values.iter().enumerate() {
        let s = lam.sqrt();
        for i in 0..n {
            for j in 0..n {
                r[(i, j)] += s * eig.vectors[(i, k)] * eig.vectors[(j, k)];
            }
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frobenius_examples() {
        assert!((frobenius_norm(&MatN::identity(2)) - 2f64.sqrt()).abs() < 1e-15);
        let d = MatN::diag(&[0.20, 1.04]);
        assert!((frobenius_norm(&d) - (0.04f64 + 1.0816).sqrt()).abs() < 1e-15);
        assert!((frobenius_norm(&d) - 1.0591).abs() < 1e-4);
        assert_eq!(frobenius_norm(&MatN::zeros(3)), 0.0);
    }

    #[test]
    fn operator_norm_examples() {
        assert!((operator_norm(&MatN::diag(&[1.0, 5.0])) - 5.0).abs() < 1e-14);
        let rot = MatN::from_array([[0.0, -1.0], [1.0, 0.0]]);
        assert!((operator_norm(&rot) - 1.0).abs() < 1e-15);
        // A^T A eigenvalues by the 2x2 quadratic formula
        let a = MatN::from_array([[5.0, 0.2], [0.2, 0.01]]);
        let ata = a.transpose().mul_mat(&a);
        let (tr, det) = (ata.trace(), ata[(0, 0)] * ata[(1, 1)] - ata[(0, 1)] * ata[(1, 0)]);
        let lmax = 0.5 * (tr + (tr * tr - 4.0 * det).sqrt());
        assert!((operator_norm(&a) - lmax.sqrt()).abs() < 1e-13);
        assert!((operator_norm(&a) - 5.0080).abs() < 1e-4);
    }

    #[test]
    fn operator_norm_jacobi_path_matches_closed_form() {
        let a = MatN::from_array([[1.0, 2.0, 0.0], [0.0, 3.0, -1.0], [0.5, 0.0, 2.0]]);
        // Jacobi on A^T A for the 3x3, closed form on a block-diagonal 2x2 embedding
        let big = operator_norm(&a);
        let mut x = VecN::from([0.3, 0.9, -0.2]);
        for _ in 0..500 {
            let y = a.transpose().mul_vec(&a.mul_vec(&x));
            x = y.scale(1.0 / y.norm());
        }
        assert!((a.mul_vec(&x).norm() - big).abs() < 1e-10);
    }

    #[test]
    fn min_eig_examples() {
        assert!((symmetric_part_min_eig(&MatN::identity(2)) - 1.0).abs() < 1e-15);
        assert!((symmetric_part_min_eig(&MatN::diag(&[1.0, -1.0])) + 1.0).abs() < 1e-15);
        let a = MatN::from_array([[5.0, 0.2], [0.2, 0.01]]);
        let (t, d) = (5.01f64, 5.0 * 0.01 - 0.04);
        let lmin = 0.5 * (t - (t * t - 4.0 * d).sqrt());
        assert!((symmetric_part_min_eig(&a) - lmin).abs() < 1e-15);
        assert!((symmetric_part_min_eig(&a) - 0.00199).abs() < 1e-5);
    }

    #[test]
    fn jacobi_reconstructs() {
        let s = MatN::from_array([[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 1.0]]);
        let e = symmetric_eigen(&s);
        for k in 0..3 {
            let col: Vec<f64> = (0..3).map(|i| e.vectors[(i, k)]).collect();
            let v = VecN::from(col);
            let r = &s.mul_vec(&v) - &v.scale(e.values[k]);
            assert!(r.norm() < 1e-12);
        }
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn sqrt_squares_back() {
        let a = MatN::from_array([[2.0, 0.3], [0.3, 1.0]]);
        let r = spd_sqrt(&a).unwrap();
        let back = r.mul_mat(&r);
        assert!(frobenius_norm(&(&back - &a)) < 1e-13);
        assert!(spd_sqrt(&MatN::diag(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn inverse_and_singular() {
        let a = MatN::from_array([[2.0, 1.0], [1.0, 3.0]]);
        let inv = a.inverse().unwrap();
        assert!(frobenius_norm(&(&a.mul_mat(&inv) - &MatN::identity(2))) < 1e-14);
        assert!(MatN::from_array([[1.0, 2.0], [2.0, 4.0]]).inverse().is_none());
    }

    #[test]
    fn from_rows_rejects_ragged() {
        assert!(MatN::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(MatN::from_rows(&[]).is_err());
    }
}
