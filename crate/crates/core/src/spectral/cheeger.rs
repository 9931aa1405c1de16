//! Graph conductance: exhaustive minimum for small graphs and the Fiedler
//! sweep upper bound otherwise.

use super::fiedler_exact;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Largest graph `cheeger_exact` will enumerate (2^15 subsets).
pub const CHEEGER_EXACT_MAX_N: usize = 16;

/// `h_S = |∂S| / min(vol(S), vol(S̄))` for the node subset flagged in `in_s`.
///
/// Returns infinity for the empty set and for the full node set.
pub fn cut_conductance(g: &Graph, in_s: &[bool]) -> f64 {
    let degrees = g.degrees();
    let mut cut = 0.0;
    let mut vol_s = 0.0;
    let mut vol_rest = 0.0;
    for u in 0..g.n() {
        if in_s[u] {
            vol_s += degrees[u];
            for v in 0..g.n() {
                if !in_s[v] {
                    cut += g.weight(u, v);
                }
            }
        } else {
            vol_rest += degrees[u];
        }
    }
    let denom = vol_s.min(vol_rest);
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        cut / denom
    }
}

/// Exact Cheeger constant by enumerating every nonempty proper subset.
///
/// Node `n − 1` is pinned outside `S`, which covers every cut once because
/// `h_S = h_{S̄}`. Returns the constant and one minimizing subset.
pub fn cheeger_exact(g: &Graph) -> Result<(f64, Vec<usize>)> {
    let n = g.n();
    if n > CHEEGER_EXACT_MAX_N {
        return Err(Error::domain(format!(
            "graph has {n} nodes; exhaustive Cheeger search is capped at {CHEEGER_EXACT_MAX_N}, use cheeger_sweep"
        )));
    }
    g.require_connected()?;
    if n < 2 {
        return Err(Error::domain("Cheeger constant needs at least two nodes"));
    }
    let mut best = (f64::INFINITY, 0u32);
    let mut in_s = vec![false; n];
    for mask in 1u32..(1u32 << (n - 1)) {
        for (u, slot) in in_s.iter_mut().enumerate() {
            *slot = mask & (1 << u) != 0;
        }
        let h = cut_conductance(g, &in_s);
        if h < best.0 {
            best = (h, mask);
        }
    }
    let set = (0..n).filter(|&u| best.1 & (1 << u) != 0).collect();
    Ok((best.0, set))
}

/// Minimum conductance over the `n − 1` prefix cuts of the nodes sorted by
/// the exact Fiedler vector of `L`. An upper bound on the Cheeger constant.
pub fn cheeger_sweep(g: &Graph) -> Result<f64> {
    let (_, f) = fiedler_exact(g, false)?;
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.sort_by(|&a, &b| f[a].total_cmp(&f[b]).then(a.cmp(&b)));
    let mut in_s = vec![false; g.n()];
    let mut best = f64::INFINITY;
    for &u in &order[..g.n() - 1] {
        in_s[u] = true;
        best = best.min(cut_conductance(g, &in_s));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_er, gen_named, gen_sbm};

    #[test]
    fn fixture_constants() {
        // bridge cut: |∂S| = 1, vol(S) = 2 + 2 + 3 = 7
        let (h, set) = cheeger_exact(&gen_named("barbell6").unwrap()).unwrap();
        assert!((h - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(set, vec![0, 1, 2]);

        let (h, set) = cheeger_exact(&gen_named("K3").unwrap()).unwrap();
        assert!((h - 1.0).abs() < 1e-15);
        assert_eq!(set.len(), 1);

        let (h, _) = cheeger_exact(&gen_named("P2").unwrap()).unwrap();
        assert_eq!(h, 1.0);
    }

    #[test]
    fn exact_refuses_large_graphs() {
        let g = gen_er(17, 0.5, 1).unwrap();
        let err = cheeger_exact(&g).unwrap_err().to_string();
        assert!(err.contains("use cheeger_sweep"), "{err}");
    }

    #[test]
    fn sweep_matches_exact_on_fixtures() {
        for name in ["barbell6", "K3", "P2", "C4", "P3"] {
            let g = gen_named(name).unwrap();
            let exact = cheeger_exact(&g).unwrap().0;
            let sweep = cheeger_sweep(&g).unwrap();
            assert!(sweep >= exact - 1e-15, "{name}");
        }
        let g = gen_named("barbell6").unwrap();
        assert_eq!(cheeger_sweep(&g).unwrap(), cheeger_exact(&g).unwrap().0);
        assert_eq!(cheeger_sweep(&gen_named("K3").unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn sweep_bounded_by_block_cut_on_sbm() {
        let sbm = gen_sbm((15, 15), 0.8, 0.05, 3).unwrap();
        let in_s: Vec<bool> = sbm.blocks.iter().map(|&b| b == 0).collect();
        let block = cut_conductance(&sbm.graph, &in_s);
        assert!(cheeger_sweep(&sbm.graph).unwrap() <= block + 1e-15);
    }

    #[test]
    fn sweep_upper_bounds_exact_on_random_graphs() {
        for seed in 0..20 {
            let g = gen_er(10, 0.4, seed).unwrap();
            let exact = cheeger_exact(&g).unwrap().0;
            assert!(cheeger_sweep(&g).unwrap() >= exact - 1e-15);
        }
    }
}
