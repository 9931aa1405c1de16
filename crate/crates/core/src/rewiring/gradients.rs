//! Closed-form spectral-gap gradients and their finite-difference oracle.

use std::ops::{Mul, Sub};

use crate::error::{Error, Result};
use crate::graph::{laplacian, normalized_laplacian, Graph};
use crate::linalg::{sym_eig, Matrix};

/// Smallest `λ3 − λ2` accepted by [`fd_gap_gradient`].
pub const MIN_SIMPLE_GAP: f64 = 1e-6;

/// Approximate Fiedler vector `(S[u,0] − S[u,1]) / √n` of a two-way soft
/// assignment.
pub fn fiedler_approx(s: &Matrix) -> Result<Vec<f64>> {
    if s.cols() != 2 {
        return Err(Error::shape(
            "fiedler_approx",
            format!("assignment must have 2 columns, got {:?}", s.shape()),
        ));
    }
    let scale = 1.0 / (s.rows() as f64).sqrt();
    Ok((0..s.rows()).map(|u| (s[(u, 0)] - s[(u, 1)]) * scale).collect())
}

/// Ratio-cut gradient of λ2 with respect to each adjacency entry:
/// `∇[u][v] = f[u]² − f[u]·f[v]`.
pub fn grad_rcut(f2: &[f64]) -> Matrix {
    let n = f2.len();
    Matrix::from_vec(n, n, grad_rcut_entries(f2).into_iter().flatten().collect())
}

/// [`grad_rcut`] over any ring-like scalar, row-major. Lets callers check
/// the block structure in exact arithmetic.
pub fn grad_rcut_entries<T>(f2: &[T]) -> Vec<Vec<T>>
where
    T: Copy + Mul<Output = T> + Sub<Output = T>,
{
    f2.iter()
        .map(|&fu| f2.iter().map(|&fv| fu * fu - fu * fv).collect())
        .collect()
}

/// Normalized-cut gradient of λ'2:
/// `2 d' (fᵀ D^{1/2} A f) 1ᵀ + D^{-1/2} f fᵀ D^{-1/2}` with
/// `d'[u] = −½ d_u^{-3/2}`.
pub fn grad_ncut(f2: &[f64], a: &Matrix, degrees: &[f64]) -> Result<Matrix> {
    let n = f2.len();
    if a.shape() != (n, n) || degrees.len() != n {
        return Err(Error::shape(
            "grad_ncut",
            format!("f2 has {n} entries, A is {:?}, {} degrees", a.shape(), degrees.len()),
        ));
    }
    if let Some(u) = degrees.iter().position(|&d| d <= 0.0) {
        return Err(Error::ZeroDegree(u));
    }
    let sqrt_d: Vec<f64> = degrees.iter().map(|d| d.sqrt()).collect();
    let af = a.matvec(f2);
    let s: f64 = (0..n).map(|u| f2[u] * sqrt_d[u] * af[u]).sum();
    let mut g = Matrix::zeros(n, n);
    for u in 0..n {
        let d_prime = -0.5 * degrees[u].powf(-1.5);
        for v in 0..n {
            g[(u, v)] = 2.0 * d_prime * s + f2[u] * f2[v] / (sqrt_d[u] * sqrt_d[v]);
        }
    }
    Ok(g)
}

/// Gradient with respect to an undirected pair weight: `G + Gᵀ`.
pub fn pair_sensitivity(grad: &Matrix) -> Matrix {
    grad.add(&grad.transpose())
}

fn gap_eigenvalues(a: &Matrix, normalized: bool) -> Result<Vec<f64>> {
    let g = Graph::from_adjacency(a.clone())?;
    let l = if normalized {
        normalized_laplacian(&g)?
    } else {
        laplacian(&g)
    };
    Ok(sym_eig(&l)?.eigenvalues)
}

/// Central difference of the exact λ2 (λ'2 when `normalized`) under a
/// symmetric perturbation `w_uv ± h` of every edge. Non-edges are zero.
pub fn fd_gap_gradient(g: &Graph, normalized: bool, h: f64) -> Result<Matrix> {
    g.require_connected()?;
    if !(h > 0.0) {
        return Err(Error::domain(format!("finite-difference step must be > 0, got {h}")));
    }
    let lambdas = gap_eigenvalues(g.adjacency(), normalized)?;
    if lambdas.len() >= 3 && lambdas[2] - lambdas[1] < MIN_SIMPLE_GAP {
        return Err(Error::domain(format!(
            "eigenvalue crossing: lambda2 = {} and lambda3 = {} are not separated",
            lambdas[1], lambdas[2]
        )));
    }
    let n = g.n();
    let mut out = Matrix::zeros(n, n);
    for (u, v, w) in g.edges() {
        if w <= h {
            return Err(Error::domain(format!(
                "edge ({u}, {v}) weight {w} does not exceed the step {h}"
            )));
        }
        let at = |delta: f64| -> Result<f64> {
            let mut a = g.adjacency().clone();
            a[(u, v)] = w + delta;
            a[(v, u)] = w + delta;
            Ok(gap_eigenvalues(&a, normalized)?[1])
        };
        let d = (at(h)? - at(-h)?) / (2.0 * h);
        out[(u, v)] = d;
        out[(v, u)] = d;
    }
    Ok(out)
}
