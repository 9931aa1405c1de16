//! Exact spectral quantities of a connected graph: commute-time embedding,
//! effective resistances and Fiedler pairs, plus the conductance and bound
//! diagnostics in [`cheeger`] and [`bounds`].
//!
//! Effective resistance has three independent routes here, and the tests
//! hold them against each other:
//!
//! 1. the Laplacian pseudo-inverse quadratic form `(e_u − e_v)ᵀ L⁺ (e_u − e_v)`,
//! 2. the eigen-sum `Σ_{i≥2} (f_i(u) − f_i(v))² / λ_i`,
//! 3. squared distances in the commute-time embedding divided by `vol(G)`.

pub mod bounds;
pub mod cheeger;

pub use bounds::{bounds_report, resistance_bound_check, BoundsReport, PairBound, ResistanceBoundReport};
pub use cheeger::{cheeger_exact, cheeger_sweep, cut_conductance, CHEEGER_EXACT_MAX_N};

use crate::error::{Error, Result};
use crate::graph::{laplacian, normalized_laplacian, Graph};
use crate::linalg::{cdist, laplacian_pinv, sym_eig, zero_eigenvalue_tol, Matrix, SpectralDecomposition};

/// Spectral commute-time embedding. Column `u` of `z` is node `u`'s
/// coordinates; `‖z_u − z_v‖² = vol(G) · R_uv`.
#[derive(Debug, Clone)]
pub struct CTEmbedding {
    pub z: Matrix,
    pub volume: f64,
}

impl CTEmbedding {
    /// Node coordinates as rows (n × k), the layout `cdist` expects.
    pub fn node_rows(&self) -> Matrix {
        self.z.transpose()
    }

    pub fn dim(&self) -> usize {
        self.z.rows()
    }
}

/// Effective resistances between every pair of nodes.
#[derive(Debug, Clone)]
pub struct ResistanceMatrix {
    pub r: Matrix,
    pub volume: f64,
}

impl ResistanceMatrix {
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.r[(u, v)]
    }

    /// Commute times `CT_uv = vol(G) · R_uv`.
    pub fn commute_times(&self) -> Matrix {
        self.r.scale(self.volume)
    }

    /// Largest resistance and one pair attaining it.
    pub fn diameter(&self) -> (f64, (usize, usize)) {
        let n = self.r.rows();
        let mut best = (0.0, (0, 0));
        for u in 0..n {
            for v in (u + 1)..n {
                if self.r[(u, v)] > best.0 {
                    best = (self.r[(u, v)], (u, v));
                }
            }
        }
        best
    }

    /// `Σ_{(u,v)∈E} w_uv R_uv`; equals `n − 1` on a connected graph.
    pub fn foster_sum(&self, g: &Graph) -> f64 {
        g.edges().iter().map(|&(u, v, w)| w * self.r[(u, v)]).sum()
    }
}

fn laplacian_decomposition(g: &Graph) -> Result<(Matrix, SpectralDecomposition)> {
    g.require_connected()?;
    let l = laplacian(g);
    let decomp = sym_eig(&l)?;
    if decomp.near_zero_count() != 1 {
        return Err(Error::Disconnected);
    }
    Ok((l, decomp))
}

/// `Z = √vol(G) · Λ^{-1/2} Fᵀ` over the non-zero Laplacian eigenpairs.
pub fn spectral_cte(g: &Graph) -> Result<CTEmbedding> {
    let (_, decomp) = laplacian_decomposition(g)?;
    let volume = g.volume();
    let n = g.n();
    let mut z = Matrix::zeros(n - 1, n);
    for i in 1..n {
        let scale = (volume / decomp.eigenvalues[i]).sqrt();
        for u in 0..n {
            z[(i - 1, u)] = scale * decomp.eigenvectors[(u, i)];
        }
    }
    Ok(CTEmbedding { z, volume })
}

/// Effective resistances via the pseudo-inverse quadratic form.
pub fn resistance_matrix(g: &Graph) -> Result<ResistanceMatrix> {
    let (l, decomp) = laplacian_decomposition(g)?;
    let pinv = laplacian_pinv(&l, &decomp)?;
    let n = g.n();
    let mut r = Matrix::zeros(n, n);
    for u in 0..n {
        for v in (u + 1)..n {
            let x = pinv[(u, u)] + pinv[(v, v)] - 2.0 * pinv[(u, v)];
            r[(u, v)] = x;
            r[(v, u)] = x;
        }
    }
    Ok(ResistanceMatrix {
        r,
        volume: g.volume(),
    })
}

/// Effective resistances via the eigen-sum `Σ_{i≥2} (f_i(u) − f_i(v))² / λ_i`.
pub fn resistance_eigensum(g: &Graph) -> Result<ResistanceMatrix> {
    let (_, decomp) = laplacian_decomposition(g)?;
    let n = g.n();
    let mut r = Matrix::zeros(n, n);
    for u in 0..n {
        for v in (u + 1)..n {
            let x: f64 = (1..n)
                .map(|i| {
                    let d = decomp.eigenvectors[(u, i)] - decomp.eigenvectors[(v, i)];
                    d * d / decomp.eigenvalues[i]
                })
                .sum();
            r[(u, v)] = x;
            r[(v, u)] = x;
        }
    }
    Ok(ResistanceMatrix {
        r,
        volume: g.volume(),
    })
}

/// Effective resistances recovered from an embedding: `‖z_u − z_v‖² / vol`.
pub fn resistance_from_embedding(cte: &CTEmbedding) -> ResistanceMatrix {
    ResistanceMatrix {
        r: cdist(&cte.node_rows(), true).scale(1.0 / cte.volume),
        volume: cte.volume,
    }
}

/// Second-smallest eigenpair of `L` (or of the normalized Laplacian).
pub fn fiedler_exact(g: &Graph, normalized: bool) -> Result<(f64, Vec<f64>)> {
    let decomp = fiedler_decomposition(g, normalized)?;
    Ok((decomp.eigenvalues[1], decomp.vector(1)))
}

/// Full decomposition of `L` or `𝓛` for a connected graph with n ≥ 2.
pub(crate) fn fiedler_decomposition(g: &Graph, normalized: bool) -> Result<SpectralDecomposition> {
    g.require_connected()?;
    if g.n() < 2 {
        return Err(Error::domain("Fiedler pair needs at least two nodes"));
    }
    let m = if normalized {
        normalized_laplacian(g)?
    } else {
        laplacian(g)
    };
    let decomp = sym_eig(&m)?;
    let tol = zero_eigenvalue_tol(&decomp.eigenvalues);
    if decomp.eigenvalues[1] <= tol {
        return Err(Error::Disconnected);
    }
    Ok(decomp)
}
