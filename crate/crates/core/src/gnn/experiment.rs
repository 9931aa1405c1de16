use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{build_model, ModelKind, ModelSpec};
use super::train::{train_on_dataset, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::{gen_er, gen_sbm, Graph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Sbm,
    Er,
}

impl Dataset {
    pub const ALL: [Dataset; 2] = [Dataset::Sbm, Dataset::Er];
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dataset::Sbm => "sbm",
            Dataset::Er => "er",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub graphs_per_dataset: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub hidden_dim: usize,
    pub k_pool: usize,
    /// `seed` is overwritten by each run's seed.
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            graphs_per_dataset: 200,
            min_nodes: 20,
            max_nodes: 40,
            hidden_dim: 32,
            k_pool: 8,
            train: TrainConfig::default(),
        }
    }
}

/// Two balanced classes. SBM: class 0 has `p = 0.8, q ∈ [0.1, 0.15]`,
/// class 1 has `p = 0.5, q ∈ [0.01, 0.1]`. ER: class 0 has
/// `p ∈ [0.3, 0.5]`, class 1 has `p ∈ [0.4, 0.8]`.
pub fn synthetic_dataset(dataset: Dataset, cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Graph>> {
    if cfg.min_nodes < 2 || cfg.min_nodes > cfg.max_nodes {
        return Err(Error::domain(format!(
            "invalid node range [{}, {}]",
            cfg.min_nodes, cfg.max_nodes
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (dataset as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    (0..cfg.graphs_per_dataset)
        .map(|i| {
            let label = i % 2;
            let n = rng.random_range(cfg.min_nodes..=cfg.max_nodes);
            let graph_seed = rng.random::<u64>();
            let g = match (dataset, label) {
                (Dataset::Sbm, 0) => {
                    let q = rng.random_range(0.1..=0.15);
                    gen_sbm((n / 2, n - n / 2), 0.8, q, graph_seed)?.graph
                }
                (Dataset::Sbm, _) => {
                    let q = rng.random_range(0.01..=0.1);
                    gen_sbm((n / 2, n - n / 2), 0.5, q, graph_seed)?.graph
                }
                (Dataset::Er, 0) => gen_er(n, rng.random_range(0.3..=0.5), graph_seed)?,
                (Dataset::Er, _) => gen_er(n, rng.random_range(0.4..=0.8), graph_seed)?,
            };
            Ok(g.with_label(label))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub dataset: Dataset,
    pub model: ModelKind,
    /// Final test accuracy of every seed, in seed order.
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over seeds.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub seeds: Vec<u64>,
    pub config: ExperimentConfig,
    pub rows: Vec<ExperimentRow>,
}

impl ExperimentTable {
    pub fn row(&self, dataset: Dataset, model: ModelKind) -> Option<&ExperimentRow> {
        self.rows.iter().find(|r| r.dataset == dataset && r.model == model)
    }
}

impl fmt::Display for ExperimentTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<8}", "dataset")?;
        for k in ModelKind::ALL {
            write!(f, "{:>18}", k.as_str())?;
        }
        writeln!(f)?;
        for d in Dataset::ALL {
            write!(f, "{:<8}", d.to_string())?;
            for k in ModelKind::ALL {
                match self.row(d, k) {
                    Some(r) => write!(f, "{:>18}", format!("{:.2} ± {:.2}", 100.0 * r.mean, 100.0 * r.std))?,
                    None => write!(f, "{:>18}", "-")?,
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Trains every model kind on both synthetic datasets for every seed and
/// reports final test accuracies.
pub fn experiment_synthetic(seeds: &[u64], cfg: &ExperimentConfig) -> Result<ExperimentTable> {
    if seeds.is_empty() {
        return Err(Error::domain("need at least one seed"));
    }
    let jobs: Vec<(Dataset, ModelKind, u64)> = Dataset::ALL
        .into_iter()
        .flat_map(|d| ModelKind::ALL.into_iter().flat_map(move |k| seeds.iter().map(move |&s| (d, k, s))))
        .collect();
    let datasets: Vec<((Dataset, u64), Vec<Graph>)> = Dataset::ALL
        .into_iter()
        .flat_map(|d| seeds.iter().map(move |&s| (d, s)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(d, s)| Ok(((d, s), synthetic_dataset(d, cfg, s)?)))
        .collect::<Result<_>>()?;
    let accuracies: Vec<f64> = jobs
        .par_iter()
        .map(|&(d, k, s)| {
            let graphs = &datasets.iter().find(|(key, _)| *key == (d, s)).expect("generated above").1;
            let spec = ModelSpec {
                hidden_dim: cfg.hidden_dim,
                k_pool: cfg.k_pool,
                ..ModelSpec::new(k, 1, 2)
            };
            let mut model = build_model(spec, s)?;
            let train = TrainConfig { seed: s, ..cfg.train };
            Ok(train_on_dataset(&mut model, graphs, &train)?.test.accuracy)
        })
        .collect::<Result<_>>()?;
    let rows = jobs
        .chunks(seeds.len())
        .zip(accuracies.chunks(seeds.len()))
        .map(|(job, acc)| {
            let (mean, std) = mean_std(acc);
            ExperimentRow {
                dataset: job[0].0,
                model: job[0].1,
                accuracies: acc.to_vec(),
                mean,
                std,
            }
        })
        .collect();
    Ok(ExperimentTable {
        seeds: seeds.to_vec(),
        config: *cfg,
        rows,
    })
}
