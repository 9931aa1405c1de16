use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{build_graph, Graph};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Resampling attempts before a generator gives up on connectivity.
pub const MAX_CONNECT_RETRIES: usize = 100;

/// Stochastic-block-model sample with its ground-truth block of every node.
#[derive(Debug, Clone)]
pub struct SbmGraph {
    pub graph: Graph,
    pub blocks: Vec<usize>,
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in (0, 1], got {p}")))
    }
}

fn sample_connected(
    n: usize,
    seed: u64,
    mut edge_prob: impl FnMut(usize, usize) -> f64,
) -> Result<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_CONNECT_RETRIES {
        let mut a = Matrix::zeros(n, n);
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.random::<f64>() < edge_prob(u, v) {
                    a[(u, v)] = 1.0;
                    a[(v, u)] = 1.0;
                }
            }
        }
        let g = Graph::from_adjacency(a)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::domain(format!(
        "no connected sample after {MAX_CONNECT_RETRIES} retries"
    )))
}

/// Erdős–Rényi `G(n, p)` conditioned on connectivity by resampling.
pub fn gen_er(n: usize, p: f64, seed: u64) -> Result<Graph> {
    check_probability("p", p)?;
    if n == 0 {
        return Err(Error::domain("graph needs at least one node"));
    }
    sample_connected(n, seed, |_, _| p)
}

/// Two-block stochastic block model conditioned on connectivity.
pub fn gen_sbm(sizes: (usize, usize), p_intra: f64, q_inter: f64, seed: u64) -> Result<SbmGraph> {
    check_probability("p_intra", p_intra)?;
    if !(0.0..p_intra).contains(&q_inter) {
        return Err(Error::domain(format!(
            "need p_intra > q_inter >= 0, got p_intra = {p_intra}, q_inter = {q_inter}"
        )));
    }
    let (n1, n2) = sizes;
    if n1 == 0 || n2 == 0 {
        return Err(Error::domain("both blocks need at least one node"));
    }
    let blocks: Vec<usize> = (0..n1 + n2).map(|u| usize::from(u >= n1)).collect();
    let graph = sample_connected(n1 + n2, seed, |u, v| {
        if blocks[u] == blocks[v] {
            p_intra
        } else {
            q_inter
        }
    })?;
    Ok(SbmGraph { graph, blocks })
}

/// Small fixture graphs used throughout the tests and the CLI.
pub fn gen_named(name: &str) -> Result<Graph> {
    let edges: Vec<(usize, usize)> = match name {
        "P2" => vec![(0, 1)],
        "P3" => vec![(0, 1), (1, 2)],
        "K3" => vec![(0, 1), (0, 2), (1, 2)],
        "C4" => vec![(0, 1), (1, 2), (2, 3), (3, 0)],
        "barbell6" => vec![(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)],
        other => {
            return Err(Error::domain(format!(
                "unknown named graph '{other}' (expected K3, P2, P3, C4 or barbell6)"
            )))
        }
    };
    let n = edges.iter().map(|&(u, v)| u.max(v)).max().unwrap_or(0) + 1;
    let weighted: Vec<_> = edges.into_iter().map(|(u, v)| (u, v, 1.0)).collect();
    build_graph(n, &weighted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bridges(g: &Graph) -> usize {
        g.edges()
            .iter()
            .filter(|&&(u, v, _)| {
                let mut a = g.adjacency().clone();
                a[(u, v)] = 0.0;
                a[(v, u)] = 0.0;
                !Graph::from_adjacency(a).unwrap().is_connected()
            })
            .count()
    }

    #[test]
    fn named_fixtures() {
        let k3 = gen_named("K3").unwrap();
        assert_eq!((k3.n(), k3.edge_count()), (3, 3));
        let bb = gen_named("barbell6").unwrap();
        assert_eq!((bb.n(), bb.edge_count()), (6, 7));
        assert_eq!(bridges(&bb), 1);
        assert!(gen_named("P99").is_err());
    }

    #[test]
    fn er_p_one_is_complete() {
        let g = gen_er(10, 1.0, 3).unwrap();
        assert_eq!(g.edge_count(), 45);
    }

    #[test]
    fn er_is_deterministic() {
        let a = gen_er(30, 0.4, 7).unwrap();
        let b = gen_er(30, 0.4, 7).unwrap();
        assert_eq!(a.adjacency().data(), b.adjacency().data());
        assert_ne!(a.adjacency().data(), gen_er(30, 0.4, 8).unwrap().adjacency().data());
    }

    #[test]
    fn er_mean_edge_count_matches_binomial() {
        let (n, p) = (30usize, 0.4);
        let pairs = (n * (n - 1) / 2) as f64;
        let seeds = 200;
        let mean = (0..seeds)
            .map(|s| gen_er(n, p, s).unwrap().edge_count() as f64)
            .sum::<f64>()
            / seeds as f64;
        // standard error of the mean of a Binomial(pairs, p)
        let sigma = (pairs * p * (1.0 - p) / seeds as f64).sqrt();
        assert!((mean - p * pairs).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn sbm_degenerate_parameters_give_two_triangles_and_a_bridge() {
        let hit = (0..2000)
            .filter_map(|seed| gen_sbm((3, 3), 1.0, 0.05, seed).ok())
            .find(|s| s.graph.edge_count() == 7)
            .expect("some seed yields a single inter-block edge");
        assert_eq!(bridges(&hit.graph), 1);
        assert_eq!(hit.blocks, vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn sbm_without_inter_edges_exhausts_retries() {
        let err = gen_sbm((3, 3), 1.0, 0.0, 1).unwrap_err();
        assert!(err.to_string().contains("retries"));
    }

    #[test]
    fn invalid_probabilities() {
        assert!(gen_er(5, 0.0, 1).is_err());
        assert!(gen_er(5, 1.5, 1).is_err());
        assert!(gen_sbm((3, 3), 0.2, 0.5, 1).is_err());
    }
}
