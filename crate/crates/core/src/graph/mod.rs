//! Graph value type and the matrices derived from it.

mod generators;

pub use generators::{gen_er, gen_named, gen_sbm, SbmGraph, MAX_CONNECT_RETRIES};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Simple undirected weighted graph stored as a dense adjacency matrix.
///
/// The adjacency is symmetric, has a zero diagonal and nonnegative entries;
/// every constructor checks this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    adjacency: Matrix,
    features: Option<Matrix>,
    label: Option<usize>,
}

/// Degrees, volume and minimum positive degree of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeView {
    pub degrees: Vec<f64>,
    pub volume: f64,
    pub d_min: f64,
}

/// Signed edge-vertex incidence matrix; one row per undirected edge `u < v`
/// with `+√w` at `u` (head) and `−√w` at `v` (tail).
#[derive(Debug, Clone)]
pub struct IncidenceMatrix {
    pub b: Matrix,
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Wraps an adjacency matrix after checking the simple-graph invariants.
    pub fn from_adjacency(adjacency: Matrix) -> Result<Self> {
        if !adjacency.is_square() {
            return Err(Error::InvalidGraph(format!(
                "adjacency must be square, got {:?}",
                adjacency.shape()
            )));
        }
        let n = adjacency.rows();
        for u in 0..n {
            if adjacency[(u, u)] != 0.0 {
                return Err(Error::InvalidGraph(format!("self-loop at node {u}")));
            }
            for v in 0..n {
                let w = adjacency[(u, v)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidGraph(format!(
                        "weight {w} on ({u}, {v}) is not a finite nonnegative number"
                    )));
                }
                if w != adjacency[(v, u)] {
                    return Err(Error::InvalidGraph(format!(
                        "adjacency is not symmetric at ({u}, {v})"
                    )));
                }
            }
        }
        Ok(Self {
            adjacency,
            features: None,
            label: None,
        })
    }

    pub fn with_features(mut self, features: Matrix) -> Result<Self> {
        if features.rows() != self.n() {
            return Err(Error::InvalidGraph(format!(
                "feature matrix has {} rows for {} nodes",
                features.rows(),
                self.n()
            )));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn n(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn features(&self) -> Option<&Matrix> {
        self.features.as_ref()
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn weight(&self, u: usize, v: usize) -> f64 {
        self.adjacency[(u, v)]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[(u, v)] > 0.0
    }

    /// Undirected edges `(u, v, w)` with `u < v`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                let w = self.adjacency[(u, v)];
                if w > 0.0 {
                    out.push((u, v, w));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&v| self.adjacency[(u, v)] > 0.0)
    }

    /// True when every edge weight is exactly 1.
    pub fn is_unweighted(&self) -> bool {
        self.adjacency.data().iter().all(|&w| w == 0.0 || w == 1.0)
    }

    pub fn degree_view(&self) -> DegreeView {
        let n = self.n();
        let degrees: Vec<f64> = (0..n).map(|u| self.adjacency.row(u).iter().sum()).collect();
        let volume = degrees.iter().sum();
        let d_min = degrees
            .iter()
            .copied()
            .filter(|&d| d > 0.0)
            .fold(f64::INFINITY, f64::min);
        DegreeView {
            degrees,
            volume,
            d_min,
        }
    }

    pub fn degrees(&self) -> Vec<f64> {
        self.degree_view().degrees
    }

    pub fn volume(&self) -> f64 {
        self.degree_view().volume
    }

    /// Connected-component labels by breadth-first search.
    pub fn components(&self) -> Vec<usize> {
        let n = self.n();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            let mut queue = std::collections::VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for v in self.neighbors(u) {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn is_connected(&self) -> bool {
        self.n() > 0 && self.components().iter().all(|&c| c == 0)
    }

    pub(crate) fn require_connected(&self) -> Result<()> {
        if self.is_connected() {
            Ok(())
        } else {
            Err(Error::Disconnected)
        }
    }

    /// Same node set and features with a new adjacency (e.g. a rewired or
    /// sparsified version of this graph).
    pub fn reweighted(&self, adjacency: Matrix) -> Result<Graph> {
        let mut g = Graph::from_adjacency(adjacency)?;
        g.features = self.features.clone();
        g.label = self.label;
        Ok(g)
    }
}

/// Builds a graph from an explicit edge list.
pub fn build_graph(n: usize, edges: &[(usize, usize, f64)]) -> Result<Graph> {
    let mut a = Matrix::zeros(n, n);
    for &(u, v, w) in edges {
        if u >= n || v >= n {
            return Err(Error::InvalidGraph(format!(
                "edge ({u}, {v}) out of range for {n} nodes"
            )));
        }
        if u == v {
            return Err(Error::InvalidGraph(format!("self-loop on edge ({u}, {v})")));
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidGraph(format!(
                "edge ({u}, {v}) has non-positive weight {w}"
            )));
        }
        if a[(u, v)] != 0.0 {
            return Err(Error::InvalidGraph(format!("duplicate edge ({u}, {v})")));
        }
        a[(u, v)] = w;
        a[(v, u)] = w;
    }
    Graph::from_adjacency(a)
}

/// Combinatorial Laplacian `L = D − A`.
pub fn laplacian(g: &Graph) -> Matrix {
    let degrees = g.degrees();
    let mut l = g.adjacency().scale(-1.0);
    for (u, d) in degrees.into_iter().enumerate() {
        l[(u, u)] = d;
    }
    l
}

/// Symmetric normalized Laplacian `I − D^{-1/2} A D^{-1/2}`.
pub fn normalized_laplacian(g: &Graph) -> Result<Matrix> {
    let degrees = g.degrees();
    if let Some(u) = degrees.iter().position(|&d| d <= 0.0) {
        return Err(Error::ZeroDegree(u));
    }
    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| d.sqrt().recip()).collect();
    let n = g.n();
    let mut l = Matrix::identity(n);
    for u in 0..n {
        for v in 0..n {
            let a = g.weight(u, v);
            if a != 0.0 {
                l[(u, v)] -= inv_sqrt[u] * a * inv_sqrt[v];
            }
        }
    }
    Ok(l)
}

/// Signed incidence matrix scaled by `√w` so that `BᵀB = L`.
pub fn incidence(g: &Graph) -> IncidenceMatrix {
    let edges = g.edges();
    let mut b = Matrix::zeros(edges.len(), g.n());
    for (row, &(u, v, w)) in edges.iter().enumerate() {
        let s = w.sqrt();
        b[(row, u)] = s;
        b[(row, v)] = -s;
    }
    IncidenceMatrix {
        b,
        edges: edges.into_iter().map(|(u, v, _)| (u, v)).collect(),
    }
}
