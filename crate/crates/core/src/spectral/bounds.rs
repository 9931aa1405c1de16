//! Bound diagnostics relating effective resistance, degrees, the spectral
//! gap and conductance.

use serde::Serialize;

use super::{cheeger_exact, cheeger_sweep, fiedler_exact, resistance_matrix, CHEEGER_EXACT_MAX_N};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Slack allowed when checking a bound that can hold with equality.
const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct PairBound {
    pub u: usize,
    pub v: usize,
    pub resistance: f64,
    /// `|R_uv − (1/d_u + 1/d_v)|`
    pub lhs: f64,
    /// `(1/λ'_2)(2/d_min)`
    pub rhs_lovasz: f64,
    /// `(1/λ'_2)(2/d_min²)`
    pub rhs_vonluxburg: f64,
    pub lovasz_holds: bool,
    pub vonluxburg_holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub pairs: Vec<PairBound>,
    /// λ'_2 of the normalized Laplacian; the gap the bounds use.
    pub spectral_gap: f64,
    /// λ_2 of the combinatorial Laplacian, reported alongside.
    pub laplacian_gap: f64,
    pub gap_used: &'static str,
    pub d_min: f64,
    /// `max lhs / rhs_lovasz` over pairs: how close commute times sit to the
    /// degree-only approximation relative to the bound.
    pub max_lovasz_ratio: f64,
}

/// Per-pair Lovász and von Luxburg diagnostics.
///
/// The Lovász inequality is a theorem, so a violation is returned as an
/// error rather than a flag.
pub fn bounds_report(g: &Graph) -> Result<BoundsReport> {
    let r = resistance_matrix(g)?;
    let (gap, _) = fiedler_exact(g, true)?;
    let (laplacian_gap, _) = fiedler_exact(g, false)?;
    let dv = g.degree_view();
    let d_min = dv.d_min;
    let rhs_lovasz = (1.0 / gap) * (2.0 / d_min);
    let rhs_vonluxburg = (1.0 / gap) * (2.0 / (d_min * d_min));

    let n = g.n();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    let mut max_ratio: f64 = 0.0;
    for u in 0..n {
        for v in (u + 1)..n {
            let resistance = r.get(u, v);
            let lhs = (resistance - (1.0 / dv.degrees[u] + 1.0 / dv.degrees[v])).abs();
            let lovasz_holds = lhs <= rhs_lovasz + BOUND_SLACK;
            if !lovasz_holds {
                return Err(Error::domain(format!(
                    "Lovász bound violated at ({u}, {v}): {lhs} > {rhs_lovasz}"
                )));
            }
            max_ratio = max_ratio.max(lhs / rhs_lovasz);
            pairs.push(PairBound {
                u,
                v,
                resistance,
                lhs,
                rhs_lovasz,
                rhs_vonluxburg,
                lovasz_holds,
                vonluxburg_holds: lhs <= rhs_vonluxburg + BOUND_SLACK,
            });
        }
    }
    Ok(BoundsReport {
        pairs,
        spectral_gap: gap,
        laplacian_gap,
        gap_used: "normalized",
        d_min,
        max_lovasz_ratio: max_ratio,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ResistancePairCheck {
    pub u: usize,
    pub v: usize,
    pub resistance: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResistanceBoundReport {
    pub eps: f64,
    /// Cheeger constant used for the diameter check.
    pub cheeger: f64,
    /// `"exact"` (enumeration) or `"sweep"` (Fiedler sweep upper bound).
    pub cheeger_method: &'static str,
    /// Largest `c` with `h_S ≥ c / vol(S)^{1/2−ε}` on every examined cut with
    /// `vol(S) ≤ vol(G)/2`.
    pub c: f64,
    /// `c` chosen so the per-pair bound is tight at the resistance diameter.
    pub c_diameter: f64,
    pub pairs: Vec<ResistancePairCheck>,
    pub fraction_holding: f64,
    pub resistance_diameter: f64,
    pub diameter_pair: (usize, usize),
    /// `1 / h²`
    pub diameter_bound: f64,
    pub diameter_within_bound: bool,
}

/// Visits every cut `S` (as a membership mask) that a conductance estimate
/// should look at: all subsets for small graphs, Fiedler prefixes otherwise.
fn candidate_cuts(g: &Graph) -> Result<Vec<Vec<bool>>> {
    let n = g.n();
    if n <= CHEEGER_EXACT_MAX_N {
        Ok((1u32..(1u32 << (n - 1)))
            .map(|mask| (0..n).map(|u| mask & (1 << u) != 0).collect())
            .collect())
    } else {
        let (_, f) = fiedler_exact(g, false)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| f[a].total_cmp(&f[b]).then(a.cmp(&b)));
        let mut in_s = vec![false; n];
        Ok(order[..n - 1]
            .iter()
            .map(|&u| {
                in_s[u] = true;
                in_s.clone()
            })
            .collect())
    }
}

/// Checks the resistance bound `R_uv ≤ (d_u^{-2ε} + d_v^{-2ε}) / (ε c²)` on
/// every pair, and the resistance diameter against `1/h²`.
pub fn resistance_bound_check(g: &Graph, eps: f64) -> Result<ResistanceBoundReport> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::domain(format!("eps must lie in (0, 1/2], got {eps}")));
    }
    let r = resistance_matrix(g)?;
    let (cheeger, cheeger_method) = if g.n() <= CHEEGER_EXACT_MAX_N {
        (cheeger_exact(g)?.0, "exact")
    } else {
        (cheeger_sweep(g)?, "sweep")
    };

    let degrees = g.degrees();
    let volume: f64 = degrees.iter().sum();
    let mut c = f64::INFINITY;
    for in_s in candidate_cuts(g)? {
        let mut cut = 0.0;
        let mut vol_s = 0.0;
        for u in 0..g.n() {
            if in_s[u] {
                vol_s += degrees[u];
                cut += (0..g.n()).filter(|&v| !in_s[v]).map(|v| g.weight(u, v)).sum::<f64>();
            }
        }
        let small = vol_s.min(volume - vol_s);
        if small > 0.0 {
            c = c.min(cut / small.powf(0.5 + eps));
        }
    }

    let weight = |u: usize| degrees[u].powf(-2.0 * eps);
    let (diameter, (du, dv)) = r.diameter();
    let c_diameter = ((weight(du) + weight(dv)) / (diameter * eps)).sqrt();

    let n = g.n();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in (u + 1)..n {
            let bound = (weight(u) + weight(v)) / (eps * c * c);
            let resistance = r.get(u, v);
            pairs.push(ResistancePairCheck {
                u,
                v,
                resistance,
                bound,
                holds: resistance <= bound + BOUND_SLACK,
            });
        }
    }
    let holding = pairs.iter().filter(|p| p.holds).count();
    let diameter_bound = 1.0 / (cheeger * cheeger);
    Ok(ResistanceBoundReport {
        eps,
        cheeger,
        cheeger_method,
        c,
        c_diameter,
        fraction_holding: holding as f64 / pairs.len().max(1) as f64,
        pairs,
        resistance_diameter: diameter,
        diameter_pair: (du, dv),
        diameter_bound,
        diameter_within_bound: diameter <= diameter_bound + BOUND_SLACK,
    })
}
