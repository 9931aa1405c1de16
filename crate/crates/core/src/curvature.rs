//! Resistance curvature of nodes and edges.
//!
//! `p_u = 1 − ½ Σ_{w∼u} R_uw` and `κ_uv = 2 (p_u + p_v) / R_uv`. The same
//! formulas can be evaluated on a learned diffusion matrix in place of `R`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{Matrix, SYMMETRY_TOL};
use crate::spectral::{resistance_matrix, ResistanceMatrix};

/// Resistances below this are treated as zero.
pub const DEGENERATE_RESISTANCE: f64 = 1e-12;
/// Diffusion weights below this give unbounded edge curvature.
pub const DEGENERATE_DIFFUSION: f64 = 1e-9;
const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeCurvature {
    pub u: usize,
    pub v: usize,
    /// `R_uv`, or the diffusion weight standing in for it.
    pub resistance: f64,
    /// `None` when the edge's resistance is (numerically) zero.
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub node_curvatures: Vec<f64>,
    pub edges: Vec<EdgeCurvature>,
}

impl CurvatureReport {
    /// Edges with unbounded curvature.
    pub fn unbounded(&self) -> impl Iterator<Item = &EdgeCurvature> {
        self.edges.iter().filter(|e| e.kappa.is_none())
    }
}

fn node_curvature_with(g: &Graph, r: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    (0..g.n())
        .map(|u| 1.0 - 0.5 * g.neighbors(u).map(|w| r(u, w)).sum::<f64>())
        .collect()
}

/// `p_u = 1 − ½ Σ_{w∼u} R_uw`.
pub fn node_curvature(g: &Graph, r: &ResistanceMatrix) -> Vec<f64> {
    node_curvature_with(g, |u, w| r.get(u, w))
}

/// `κ_uv = 2 (p_u + p_v) / R_uv` on every edge of `g`.
pub fn edge_curvature(g: &Graph, p: &[f64], r: &ResistanceMatrix) -> Result<Vec<EdgeCurvature>> {
    if p.len() != g.n() {
        return Err(Error::shape(
            "edge_curvature",
            format!("{} node curvatures for {} nodes", p.len(), g.n()),
        ));
    }
    g.edges()
        .into_iter()
        .map(|(u, v, _)| {
            let ruv = r.get(u, v);
            if ruv < DEGENERATE_RESISTANCE {
                return Err(Error::domain(format!(
                    "degenerate resistance {ruv:e} on edge ({u}, {v})"
                )));
            }
            Ok(EdgeCurvature {
                u,
                v,
                resistance: ruv,
                kappa: Some(2.0 * (p[u] + p[v]) / ruv),
            })
        })
        .collect()
}

/// Node and edge curvature from exact effective resistances.
pub fn curvature_report(g: &Graph) -> Result<CurvatureReport> {
    let r = resistance_matrix(g)?;
    let p = node_curvature(g, &r);
    let edges = edge_curvature(g, &p, &r)?;
    Ok(CurvatureReport {
        node_curvatures: p,
        edges,
    })
}

/// The same formulas with `T_uw` in place of `R_uw`. Edges whose weight is
/// below [`DEGENERATE_DIFFUSION`] get unbounded curvature.
pub fn curvature_on_diffusion(g: &Graph, t: &Matrix) -> Result<CurvatureReport> {
    let n = g.n();
    if t.shape() != (n, n) {
        return Err(Error::shape(
            "curvature_on_diffusion",
            format!("T is {:?} for a graph on {n} nodes", t.shape()),
        ));
    }
    if t.asymmetry() > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(t.asymmetry()));
    }
    for u in 0..n {
        for v in 0..n {
            let x = t[(u, v)];
            if x < 0.0 || !x.is_finite() {
                return Err(Error::domain(format!("diffusion entry ({u}, {v}) = {x} is not a nonnegative number")));
            }
            if x != 0.0 && !g.has_edge(u, v) {
                return Err(Error::domain(format!("diffusion entry ({u}, {v}) lies outside the graph's support")));
            }
        }
    }
    let p = node_curvature_with(g, |u, w| t[(u, w)]);
    let edges = g
        .edges()
        .into_iter()
        .map(|(u, v, _)| {
            let tuv = t[(u, v)];
            EdgeCurvature {
                u,
                v,
                resistance: tuv,
                kappa: (tuv >= DEGENERATE_DIFFUSION).then(|| 2.0 * (p[u] + p[v]) / tuv),
            }
        })
        .collect();
    Ok(CurvatureReport {
        node_curvatures: p,
        edges,
    })
}

/// Per-edge check of `4 − d_u − d_v ≤ κ_uv ≤ 2/R_uv` and
/// `κ^FR / R_uv ≤ κ_uv` with the simple Forman curvature
/// `κ^FR = 4 − d_u − d_v`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundFlags {
    pub u: usize,
    pub v: usize,
    pub kappa: f64,
    pub lower: f64,
    pub upper: f64,
    pub forman_ratio: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub forman_ok: bool,
    /// `κ_uv` equals the lower bound (within 1e-9).
    pub lower_tight: bool,
}

pub fn curvature_bounds_check(g: &Graph, report: &CurvatureReport) -> Result<Vec<BoundFlags>> {
    if !g.is_unweighted() {
        return Err(Error::domain("curvature bounds are stated for unweighted graphs"));
    }
    let d = g.degrees();
    report
        .edges
        .iter()
        .map(|e| {
            let kappa = e
                .kappa
                .ok_or_else(|| Error::domain(format!("edge ({}, {}) has unbounded curvature", e.u, e.v)))?;
            let lower = 4.0 - d[e.u] - d[e.v];
            let upper = 2.0 / e.resistance;
            let forman_ratio = lower / e.resistance;
            Ok(BoundFlags {
                u: e.u,
                v: e.v,
                kappa,
                lower,
                upper,
                forman_ratio,
                lower_ok: lower <= kappa + BOUND_SLACK,
                upper_ok: kappa <= upper + BOUND_SLACK,
                forman_ok: forman_ratio <= kappa + BOUND_SLACK,
                lower_tight: (kappa - lower).abs() <= BOUND_SLACK,
            })
        })
        .collect()
}
