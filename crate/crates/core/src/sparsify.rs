//! Effective-resistance spectral sparsification.
//!
//! Two variants are provided. [`greedy_sparsify`] walks the edges by
//! decreasing resistance and keeps them unweighted while the accumulated
//! projected outer products stay below `Γ·I`. [`sample_sparsify`] draws
//! edges with probability proportional to `w_e R_e` and reweights them so
//! the sampled Laplacian is an unbiased estimate of the original.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{incidence, laplacian, Graph};
use crate::linalg::{dot, laplacian_pinv_sqrt, psd_dominates, sym_eig, Matrix};

/// `v_e = L^{+/2} b_e` for one edge, with `b_e` scaled by `√w_e`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectedIncidence {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
    pub vector: Vec<f64>,
}

impl ProjectedIncidence {
    /// `‖v_e‖²`, which equals `w_e R_e`.
    pub fn norm_sq(&self) -> f64 {
        dot(&self.vector, &self.vector)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeptEdge {
    pub u: usize,
    pub v: usize,
    /// Effective resistance in the input graph.
    pub resistance: f64,
    /// Weight in the sparsified graph.
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SparsifyResult {
    pub subgraph: Graph,
    /// Greedy: acceptance order. Sampled: edge order of the input graph.
    pub kept_edges: Vec<KeptEdge>,
    pub eps: f64,
    /// `(1 + ε)/(1 − ε)`; infinite at `ε = 1`.
    pub gamma: f64,
    /// `𝓘 ⪯ Γ·I` held after every acceptance (greedy only).
    pub accumulator_ok: bool,
    /// Number of draws (sampled only).
    pub draws: Option<usize>,
}

/// One projected incidence vector per edge, in [`Graph::edges`] order.
pub fn projected_incidence(g: &Graph) -> Result<Vec<ProjectedIncidence>> {
    g.require_connected()?;
    let decomp = sym_eig(&laplacian(g))?;
    let half = laplacian_pinv_sqrt(&decomp)?;
    let inc = incidence(g);
    Ok(inc
        .edges
        .iter()
        .enumerate()
        .map(|(i, &(u, v))| ProjectedIncidence {
            u,
            v,
            weight: g.weight(u, v),
            vector: half.matvec(inc.b.row(i)),
        })
        .collect())
}

fn check_eps(g: &Graph, eps: f64) -> Result<f64> {
    let lo = 1.0 / (g.n() as f64).sqrt();
    if !(eps > lo && eps <= 1.0) {
        return Err(Error::domain(format!("eps must lie in (1/sqrt(n), 1] = ({lo}, 1], got {eps}")));
    }
    Ok(if eps == 1.0 { f64::INFINITY } else { (1.0 + eps) / (1.0 - eps) })
}

/// Greedy sparsification by decreasing effective resistance.
///
/// Edges are popped in decreasing `R_e` (ties by edge index). An edge is
/// kept when `𝓘 + v_e v_eᵀ ⪯ Γ·I`; the first rejection stops the scan.
/// Kept edges retain unit multiplicity (`s_e = 1`) and their input weight.
pub fn greedy_sparsify(g: &Graph, eps: f64) -> Result<SparsifyResult> {
    let gamma = check_eps(g, eps)?;
    let vs = projected_incidence(g)?;
    let n = g.n();
    let mut order: Vec<usize> = (0..vs.len()).collect();
    let resist: Vec<f64> = vs.iter().map(|p| p.norm_sq() / p.weight).collect();
    order.sort_by(|&a, &b| resist[b].total_cmp(&resist[a]).then(a.cmp(&b)));

    let bound = Matrix::identity(n).scale(if gamma.is_finite() { gamma } else { 1.0 });
    let mut acc = Matrix::zeros(n, n);
    let mut kept = Vec::new();
    let mut accumulator_ok = true;
    for i in order {
        let p = &vs[i];
        let candidate = acc.add(&Matrix::outer(&p.vector, &p.vector));
        if gamma.is_finite() && !psd_dominates(&bound, &candidate)? {
            break;
        }
        acc = candidate;
        accumulator_ok &= !gamma.is_finite() || psd_dominates(&bound, &acc)?;
        kept.push(KeptEdge {
            u: p.u,
            v: p.v,
            resistance: resist[i],
            weight: p.weight,
        });
    }
    let subgraph = subgraph_from(g, &kept)?;
    Ok(SparsifyResult {
        subgraph,
        kept_edges: kept,
        eps,
        gamma,
        accumulator_ok,
        draws: None,
    })
}

/// Number of draws used by [`sample_sparsify`]: `⌈n ln n / ε²⌉`.
pub fn sample_count(n: usize, eps: f64) -> usize {
    ((n as f64) * (n as f64).ln() / (eps * eps)).ceil().max(1.0) as usize
}

/// Importance sampling with `q_e = w_e R_e / (n − 1)`; each draw adds
/// `w_e / (q_e T)` to the edge's weight.
pub fn sample_sparsify(g: &Graph, eps: f64, seed: u64) -> Result<SparsifyResult> {
    let gamma = check_eps(g, eps)?;
    let vs = projected_incidence(g)?;
    let n = g.n();
    let draws = sample_count(n, eps);
    // Σ_e w_e R_e = n − 1 (Foster), so these are already normalized up to
    // rounding; WeightedIndex renormalizes anyway
    let q: Vec<f64> = vs.iter().map(|p| p.norm_sq() / (n as f64 - 1.0)).collect();
    let dist = WeightedIndex::new(&q).map_err(|e| Error::domain(format!("sampling distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weight = vec![0.0; vs.len()];
    for _ in 0..draws {
        let i = dist.sample(&mut rng);
        weight[i] += vs[i].weight / (q[i] * draws as f64);
    }
    let kept: Vec<KeptEdge> = vs
        .iter()
        .zip(&weight)
        .filter(|(_, &w)| w > 0.0)
        .map(|(p, &w)| KeptEdge {
            u: p.u,
            v: p.v,
            resistance: p.norm_sq() / p.weight,
            weight: w,
        })
        .collect();
    let subgraph = subgraph_from(g, &kept)?;
    Ok(SparsifyResult {
        subgraph,
        kept_edges: kept,
        eps,
        gamma,
        accumulator_ok: true,
        draws: Some(draws),
    })
}

fn subgraph_from(g: &Graph, kept: &[KeptEdge]) -> Result<Graph> {
    let n = g.n();
    let mut a = Matrix::zeros(n, n);
    for e in kept {
        a[(e.u, e.v)] = e.weight;
        a[(e.v, e.u)] = e.weight;
    }
    let mut sub = Graph::from_adjacency(a)?;
    if let Some(x) = g.features() {
        sub = sub.with_features(x.clone())?;
    }
    Ok(match g.label() {
        Some(l) => sub.with_label(l),
        None => sub,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityProbe {
    /// `eigenvector` (index ≥ 1 of L_G) or `random`.
    pub kind: &'static str,
    pub index: usize,
    pub ratio: f64,
}

/// Quadratic-form ratios `xᵀL'x / xᵀLx` on the non-trivial eigenvectors of
/// `L_G` and on random unit vectors orthogonal to the constant vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityReport {
    pub eps: f64,
    pub probes: Vec<SimilarityProbe>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Share of ratios inside `[1 − ε, 1 + ε]`.
    pub fraction_in_range: f64,
}

pub fn spectral_similarity_report(
    g: &Graph,
    g_sparse: &Graph,
    random_probes: usize,
    eps: f64,
    seed: u64,
) -> Result<SimilarityReport> {
    let n = g.n();
    if g_sparse.n() != n {
        return Err(Error::domain(format!(
            "node sets differ: {n} nodes vs {} nodes",
            g_sparse.n()
        )));
    }
    let l = laplacian(g);
    let ls = laplacian(g_sparse);
    let decomp = sym_eig(&l)?;
    let mut vectors: Vec<(&'static str, usize, Vec<f64>)> =
        (1..n).map(|i| ("eigenvector", i, decomp.vector(i))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..random_probes {
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = x.iter().sum::<f64>() / n as f64;
        x.iter_mut().for_each(|v| *v -= mean);
        let norm = dot(&x, &x).sqrt();
        if norm > 0.0 {
            x.iter_mut().for_each(|v| *v /= norm);
        }
        vectors.push(("random", i, x));
    }
    let mut probes = Vec::with_capacity(vectors.len());
    for (kind, index, x) in vectors {
        let base = l.quad_form(&x);
        if base <= 0.0 {
            continue;
        }
        probes.push(SimilarityProbe {
            kind,
            index,
            ratio: ls.quad_form(&x) / base,
        });
    }
    if probes.is_empty() {
        return Err(Error::domain("no probe vector has positive energy (graph has no edges?)"));
    }
    let min_ratio = probes.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = probes.iter().map(|p| p.ratio).fold(f64::NEG_INFINITY, f64::max);
    let inside = probes
        .iter()
        .filter(|p| p.ratio >= 1.0 - eps && p.ratio <= 1.0 + eps)
        .count();
    Ok(SimilarityReport {
        eps,
        fraction_in_range: inside as f64 / probes.len() as f64,
        probes,
        min_ratio,
        max_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, gen_er, gen_named};
    use crate::spectral::resistance_matrix;

    fn complete(n: usize) -> Graph {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v, 1.0));
            }
        }
        build_graph(n, &edges).unwrap()
    }

    #[test]
    fn projected_norms_are_resistances() {
        for (name, r) in [("P2", 1.0), ("K3", 2.0 / 3.0), ("C4", 0.75)] {
            let g = gen_named(name).unwrap();
            let vs = projected_incidence(&g).unwrap();
            for p in &vs {
                assert!((p.norm_sq() - r).abs() < 1e-7, "{name}");
            }
            let total: f64 = vs.iter().map(ProjectedIncidence::norm_sq).sum();
            assert!((total - (g.n() - 1) as f64).abs() < 1e-7);
        }
        let g = gen_er(14, 0.3, 6).unwrap();
        let r = resistance_matrix(&g).unwrap();
        for p in projected_incidence(&g).unwrap() {
            assert!((p.norm_sq() - r.get(p.u, p.v)).abs() < 1e-7);
        }
        let split = build_graph(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert!(projected_incidence(&split).is_err());
    }

    #[test]
    fn outer_products_sum_to_the_projector() {
        // Σ v_e v_eᵀ = L^{+/2} L L^{+/2} = I − 11ᵀ/n, so every partial sum is
        // below I ⪯ Γ·I and the greedy scan never rejects an edge.
        let g = complete(10);
        let mut acc = Matrix::zeros(10, 10);
        for p in projected_incidence(&g).unwrap() {
            acc.add_assign_scaled(&Matrix::outer(&p.vector, &p.vector), 1.0);
        }
        let projector = Matrix::identity(10).sub(&Matrix::filled(10, 10, 0.1));
        assert!(acc.sub(&projector).max_abs() < 1e-10);
        let res = greedy_sparsify(&g, 0.33).unwrap();
        assert_eq!(res.kept_edges.len(), 45);
        assert!(res.accumulator_ok);
    }

    #[test]
    fn greedy_keeps_p2_and_takes_the_bridge_first() {
        let p2 = gen_named("P2").unwrap();
        for eps in [0.75, 0.9, 1.0] {
            assert_eq!(greedy_sparsify(&p2, eps).unwrap().kept_edges.len(), 1);
        }
        let g = gen_named("barbell6").unwrap();
        let res = greedy_sparsify(&g, 0.9).unwrap();
        assert!((res.gamma - 19.0).abs() < 1e-12);
        assert_eq!((res.kept_edges[0].u, res.kept_edges[0].v), (2, 3));
        assert!(res
            .kept_edges
            .windows(2)
            .all(|w| w[0].resistance >= w[1].resistance));
    }

    #[test]
    fn eps_range_is_enforced() {
        let g = gen_named("C4").unwrap();
        for eps in [0.5, 0.0, 1.5, f64::NAN] {
            assert!(greedy_sparsify(&g, eps).is_err(), "{eps}");
            assert!(sample_sparsify(&g, eps, 0).is_err(), "{eps}");
        }
    }

    #[test]
    fn sampling_p2_gives_unit_weight() {
        let res = sample_sparsify(&gen_named("P2").unwrap(), 0.8, 1).unwrap();
        assert_eq!(res.kept_edges.len(), 1);
        assert!((res.kept_edges[0].weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let g = gen_er(12, 0.4, 2).unwrap();
        let a = sample_sparsify(&g, 0.6, 9).unwrap();
        let b = sample_sparsify(&g, 0.6, 9).unwrap();
        assert_eq!(a.kept_edges, b.kept_edges);
        assert_eq!(a.draws, Some(sample_count(12, 0.6)));
    }

    #[test]
    fn c4_draws_are_uniform() {
        // 1000 draws with q = 1/4 each; χ² with 3 dof, p > 0.01 ⇔ stat < 11.345
        let g = gen_named("C4").unwrap();
        let q: Vec<f64> = projected_incidence(&g).unwrap().iter().map(|p| p.norm_sq() / 3.0).collect();
        let dist = WeightedIndex::new(&q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut counts = [0usize; 4];
        for _ in 0..1000 {
            counts[dist.sample(&mut rng)] += 1;
        }
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - 250.0).powi(2) / 250.0).sum();
        assert!(chi2 < 11.345, "{counts:?} chi2 {chi2}");
    }

    #[test]
    fn sampled_laplacian_is_unbiased_on_c4() {
        let g = gen_named("C4").unwrap();
        let l = laplacian(&g);
        let mut mean = Matrix::zeros(4, 4);
        for seed in 0..200 {
            let res = sample_sparsify(&g, 0.6, seed).unwrap();
            mean.add_assign_scaled(&laplacian(&res.subgraph), 1.0 / 200.0);
        }
        let rel = mean.sub(&l).frobenius_norm() / l.frobenius_norm();
        assert!(rel < 0.05, "{rel}");
    }

    #[test]
    fn similarity_of_identity_and_doubling() {
        let g = gen_er(9, 0.5, 4).unwrap();
        let same = spectral_similarity_report(&g, &g, 10, 0.5, 0).unwrap();
        assert!(same.probes.iter().all(|p| p.ratio == 1.0));
        assert_eq!((same.min_ratio, same.max_ratio, same.fraction_in_range), (1.0, 1.0, 1.0));
        let doubled = g.reweighted(g.adjacency().scale(2.0)).unwrap();
        let rep = spectral_similarity_report(&g, &doubled, 10, 0.5, 0).unwrap();
        assert!(rep.probes.iter().all(|p| p.ratio == 2.0));
        assert!(spectral_similarity_report(&g, &complete(4), 1, 0.5, 0).is_err());
    }

    #[test]
    fn sampled_k10_is_usually_similar() {
        let g = complete(10);
        let mut fractions: Vec<f64> = (0..20)
            .map(|seed| {
                let res = sample_sparsify(&g, 0.5, seed).unwrap();
                spectral_similarity_report(&g, &res.subgraph, 20, 0.5, seed).unwrap().fraction_in_range
            })
            .collect();
        fractions.sort_by(f64::total_cmp);
        let median = 0.5 * (fractions[9] + fractions[10]);
        assert!(median >= 0.5, "{fractions:?}");
    }
}
