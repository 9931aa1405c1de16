//! Dense row-major matrices and the symmetric eigen machinery built on them.
//!
//! Everything in this crate works on small dense matrices (a few hundred
//! nodes at most), so a plain `Vec<f64>` with a shape is all we need. The
//! eigensolver is a cyclic Jacobi iteration: slow asymptotically but very
//! accurate, which matters because resistances, Fiedler vectors and the
//! pseudo-inverse are all compared against closed forms in the tests.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from a row-major buffer.
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "buffer of length {} cannot hold a {rows}x{cols} matrix",
            data.len()
        );
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    /// n×1 column vector.
    pub fn column(values: &[f64]) -> Self {
        Self::from_vec(values.len(), 1, values.to_vec())
    }

    /// Square diagonal matrix.
    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, values: &[f64]) {
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Matrix product. Panics on inner-dimension mismatch.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul {:?} x {:?}",
            self.shape(),
            other.shape()
        );
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `xᵀ M x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn zip_map(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(self.shape(), other.shape(), "elementwise shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| f(a)).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Matrix) -> Matrix {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|a| a * s)
    }

    pub fn add_assign_scaled(&mut self, other: &Matrix, s: f64) {
        assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// `‖M − Mᵀ‖_F`, or infinity for non-square input.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let d = self[(i, j)] - self[(j, i)];
                acc += d * d;
            }
        }
        acc.sqrt()
    }

    /// `(M + Mᵀ) / 2`.
    pub fn symmetrized(&self) -> Matrix {
        self.add(&self.transpose()).scale(0.5)
    }

    pub fn outer(a: &[f64], b: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(a.len(), b.len());
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                m[(i, j)] = x * y;
            }
        }
        m
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Eigen-decomposition of a symmetric matrix.
///
/// Eigenvalues are ascending; column `i` of `eigenvectors` pairs with
/// `eigenvalues[i]`. Each eigenvector's first component above `1e-12` in
/// magnitude is positive.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.eigenvectors.col(i)
    }

    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let v = &self.eigenvectors;
        let scaled = Matrix::from_vec(
            v.rows(),
            v.cols(),
            (0..v.rows())
                .flat_map(|i| (0..v.cols()).map(move |j| (i, j)))
                .map(|(i, j)| v[(i, j)] * self.eigenvalues[j])
                .collect(),
        );
        scaled.matmul(&v.transpose())
    }

    /// Number of eigenvalues at or below `1e-8 · max(1, λ_max)`.
    pub fn near_zero_count(&self) -> usize {
        let tol = zero_eigenvalue_tol(&self.eigenvalues);
        self.eigenvalues.iter().filter(|&&l| l.abs() <= tol).count()
    }
}

pub const SYMMETRY_TOL: f64 = 1e-9;
const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_TOL: f64 = 1e-12;

pub(crate) fn zero_eigenvalue_tol(eigenvalues: &[f64]) -> f64 {
    let lmax = eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    1e-8 * lmax.max(1.0)
}

fn off_diagonal_mass(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)] * a[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// Symmetric eigendecomposition by the cyclic Jacobi rotation method.
pub fn sym_eig(m: &Matrix) -> Result<SpectralDecomposition> {
    if !m.is_square() {
        return Err(Error::shape(
            "sym_eig",
            format!("expected a square matrix, got {:?}", m.shape()),
        ));
    }
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let n = m.rows();
    let mut a = m.symmetrized();
    let mut v = Matrix::identity(n);
    let tol = JACOBI_TOL * m.frobenius_norm().max(1.0);

    let mut converged = n <= 1;
    let mut residual = off_diagonal_mass(&a);
    for _ in 0..JACOBI_MAX_SWEEPS {
        if residual < tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        residual = off_diagonal_mass(&a);
    }
    if !converged && residual >= tol {
        return Err(Error::NoConvergence {
            sweeps: JACOBI_MAX_SWEEPS,
            residual,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]).then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.col(src);
        if let Some(first) = col.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                col.iter_mut().for_each(|x| *x = -*x);
            }
        }
        eigenvectors.set_col(dst, &col);
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Applies `g(λ)` to the non-trivial spectrum of a connected-graph Laplacian:
/// `Σ_{i≥2} g(λ_i) f_i f_iᵀ`.
fn laplacian_spectral_function(
    decomp: &SpectralDecomposition,
    g: impl Fn(f64) -> f64,
) -> Result<Matrix> {
    if decomp.near_zero_count() >= 2 {
        return Err(Error::Disconnected);
    }
    let n = decomp.len();
    let tol = zero_eigenvalue_tol(&decomp.eigenvalues);
    let mut out = Matrix::zeros(n, n);
    for (i, &lambda) in decomp.eigenvalues.iter().enumerate() {
        if lambda.abs() <= tol {
            continue;
        }
        let f = decomp.vector(i);
        let w = g(lambda);
        for u in 0..n {
            let fu = w * f[u];
            for v in 0..n {
                out[(u, v)] += fu * f[v];
            }
        }
    }
    Ok(out)
}

/// Moore–Penrose pseudo-inverse of a connected graph's Laplacian,
/// `L⁺ = Σ_{i≥2} λ_i⁻¹ f_i f_iᵀ`.
pub fn laplacian_pinv(l: &Matrix, decomp: &SpectralDecomposition) -> Result<Matrix> {
    if l.rows() != decomp.len() {
        return Err(Error::shape(
            "laplacian_pinv",
            format!("laplacian {:?} vs decomposition of size {}", l.shape(), decomp.len()),
        ));
    }
    laplacian_spectral_function(decomp, |lambda| 1.0 / lambda)
}

/// `L^{+/2} = Σ_{i≥2} λ_i^{-1/2} f_i f_iᵀ`, the symmetric square root of `L⁺`.
pub fn laplacian_pinv_sqrt(decomp: &SpectralDecomposition) -> Result<Matrix> {
    laplacian_spectral_function(decomp, |lambda| lambda.sqrt().recip())
}

/// Pairwise Euclidean distances between the rows of `z`.
pub fn cdist(z: &Matrix, squared: bool) -> Matrix {
    let n = z.rows();
    let mut out = Matrix::zeros(n, n);
    for u in 0..n {
        for v in (u + 1)..n {
            let d2: f64 = z
                .row(u)
                .iter()
                .zip(z.row(v))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let d = if squared { d2 } else { d2.sqrt() };
            out[(u, v)] = d;
            out[(v, u)] = d;
        }
    }
    out
}

/// Loewner-order test `lo ⪯ hi`: the smallest eigenvalue of `hi − lo` is at
/// least `-1e-9`.
pub fn psd_dominates(hi: &Matrix, lo: &Matrix) -> Result<bool> {
    if hi.shape() != lo.shape() || !hi.is_square() {
        return Err(Error::shape(
            "psd_dominates",
            format!("{:?} vs {:?}", hi.shape(), lo.shape()),
        ));
    }
    let diff = hi.sub(lo);
    let decomp = sym_eig(&diff)?;
    Ok(decomp.eigenvalues.first().is_none_or(|&l| l >= -1e-9))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3_laplacian() -> Matrix {
        Matrix::from_rows(&[[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])
    }

    #[test]
    fn identity_eigenvalues_are_one() {
        let d = sym_eig(&Matrix::identity(3)).unwrap();
        for l in d.eigenvalues {
            assert!((l - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn p2_laplacian_closed_form() {
        let l = Matrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]);
        let d = sym_eig(&l).unwrap();
        assert!(d.eigenvalues[0].abs() < 1e-14);
        assert!((d.eigenvalues[1] - 2.0).abs() < 1e-14);
        let s = 1.0 / 2f64.sqrt();
        let f1 = d.vector(0);
        let f2 = d.vector(1);
        assert!((f1[0] - s).abs() < 1e-12 && (f1[1] - s).abs() < 1e-12);
        // sign convention: first component positive
        assert!((f2[0] - s).abs() < 1e-12 && (f2[1] + s).abs() < 1e-12);
    }

    #[test]
    fn p3_characteristic_polynomial() {
        // det(L - x I) = -x (x - 1)(x - 3)
        let d = sym_eig(&path3_laplacian()).unwrap();
        let expected = [0.0, 1.0, 3.0];
        for (l, e) in d.eigenvalues.iter().zip(expected) {
            assert!((l - e).abs() < 1e-12, "{l} vs {e}");
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]);
        assert!(matches!(sym_eig(&m), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn pinv_of_p2() {
        let l = Matrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]);
        let d = sym_eig(&l).unwrap();
        let p = laplacian_pinv(&l, &d).unwrap();
        let expected = Matrix::from_rows(&[[0.25, -0.25], [-0.25, 0.25]]);
        assert!(p.sub(&expected).max_abs() < 1e-14);
    }

    #[test]
    fn pinv_of_k3_has_two_ninths_on_diagonal() {
        let l = Matrix::from_rows(&[[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]]);
        let d = sym_eig(&l).unwrap();
        let p = laplacian_pinv(&l, &d).unwrap();
        for i in 0..3 {
            assert!((p[(i, i)] - 2.0 / 9.0).abs() < 1e-12);
        }
        let llpl = l.matmul(&p).matmul(&l);
        assert!(llpl.sub(&l).max_abs() < 1e-7);
    }

    #[test]
    fn pinv_rejects_disconnected() {
        // two disjoint edges
        let mut l = Matrix::zeros(4, 4);
        for (u, v) in [(0, 1), (2, 3)] {
            l[(u, u)] += 1.0;
            l[(v, v)] += 1.0;
            l[(u, v)] -= 1.0;
            l[(v, u)] -= 1.0;
        }
        let d = sym_eig(&l).unwrap();
        assert!(matches!(laplacian_pinv(&l, &d), Err(Error::Disconnected)));
    }

    #[test]
    fn cdist_small_cases() {
        let z = Matrix::from_rows(&[[0.0], [3.0], [4.0]]);
        let d = cdist(&z, false);
        assert_eq!(d[(0, 2)], 4.0);
        assert_eq!(cdist(&z, true)[(0, 2)], 16.0);
        assert_eq!(d.diagonal(), vec![0.0; 3]);
    }

    #[test]
    fn psd_dominance_examples() {
        let i = Matrix::identity(3);
        assert!(psd_dominates(&i.scale(2.0), &i).unwrap());
        assert!(!psd_dominates(&i, &i.scale(2.0)).unwrap());

        // Γ = (1+ε)/(1−ε) = 3 at ε = 0.5; rank-one v vᵀ has top eigenvalue ‖v‖² = 2.9
        let v = [2.9f64.sqrt(), 0.0, 0.0];
        let gamma = 1.5 / 0.5;
        assert!(psd_dominates(&i.scale(gamma), &Matrix::outer(&v, &v)).unwrap());

        assert!(psd_dominates(&i, &Matrix::identity(2)).is_err());
    }
}
