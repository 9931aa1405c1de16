//! Node inputs for the learned layers.
//!
//! Featureless graphs get their degree as the only attribute. On top of the
//! attributes, the layers see a few random node signals smoothed by a lazy
//! random walk: after a handful of steps those signals are dominated by the
//! slow (low-frequency) modes of the graph, which is the structural
//! information a single message-passing stage would provide.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Number of smoothed random channels appended to the attributes.
    pub random_channels: usize,
    /// Lazy random-walk steps applied to each random channel.
    pub smoothing_steps: usize,
    pub seed: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            random_channels: 8,
            smoothing_steps: 10,
            seed: 0,
        }
    }
}

/// Returns `g` with a one-column degree feature when it has none.
pub fn inject_degree_features(g: Graph) -> Result<Graph> {
    if g.features().is_some() {
        return Ok(g);
    }
    let d = g.degrees();
    g.with_features(Matrix::column(&d))
}

/// Width of [`node_inputs`] for graphs with `attribute_dim` attributes.
pub fn input_dim(attribute_dim: usize, cfg: &FeatureConfig) -> usize {
    attribute_dim + cfg.random_channels
}

fn graph_hash(g: &Graph, seed: u64) -> u64 {
    // FNV-1a over the adjacency bits; the same graph always draws the same
    // random channels, independent of dataset order.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for x in g.adjacency().data() {
        for b in x.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Attributes (degree if absent) followed by smoothed random channels.
pub fn node_inputs(g: &Graph, cfg: &FeatureConfig) -> Result<Matrix> {
    let n = g.n();
    let degrees = g.degrees();
    if let Some(u) = degrees.iter().position(|&d| d <= 0.0) {
        return Err(Error::ZeroDegree(u));
    }
    let attrs = match g.features() {
        Some(x) => x.clone(),
        None => Matrix::column(&degrees),
    };
    let volume: f64 = degrees.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(graph_hash(g, cfg.seed));
    let width = attrs.cols() + cfg.random_channels;
    let mut out = Matrix::zeros(n, width);
    for u in 0..n {
        out.row_mut(u)[..attrs.cols()].copy_from_slice(attrs.row(u));
    }
    for c in 0..cfg.random_channels {
        let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        for _ in 0..cfg.smoothing_steps {
            let ax = g.adjacency().matvec(&x);
            // self weight 2/3 keeps the operator's spectrum in [1/3, 1], so
            // no eigendirection (e.g. the bipartite one of P2) is annihilated
            x = (0..n).map(|u| (2.0 * x[u] + ax[u] / degrees[u]) / 3.0).collect();
        }
        // drop the stationary (constant) component, then unit RMS
        let mean = (0..n).map(|u| degrees[u] * x[u]).sum::<f64>() / volume;
        x.iter_mut().for_each(|v| *v -= mean);
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        let scale = if rms > 1e-12 { 1.0 / rms } else { 0.0 };
        for u in 0..n {
            out[(u, attrs.cols() + c)] = x[u] * scale;
        }
    }
    Ok(out)
}
