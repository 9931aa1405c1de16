use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::{AdamConfig, ParameterSet};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Mini-batch schedule shared by every trainer in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 16,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

/// Per-item loss value and parameter gradients.
pub fn loss_and_grads<T, F>(params: &ParameterSet, item: &T, loss: &F) -> Result<(f64, Vec<Matrix>)>
where
    F: Fn(&mut Tape, &ParameterSet, &T) -> Result<Var>,
{
    let mut tape = Tape::new();
    let l = loss(&mut tape, params, item)?;
    let value = tape.scalar(l);
    let grads = tape.backward(l)?.for_params(params);
    Ok((value, grads))
}

/// Minimizes the mean of `loss` over `items` with Adam.
///
/// Items of a batch are differentiated in parallel on separate tapes; the
/// gradients are summed in item order, so results do not depend on thread
/// scheduling. Returns the mean loss of every epoch.
pub fn fit<T, F>(params: &mut ParameterSet, items: &[T], cfg: &FitConfig, loss: F) -> Result<Vec<f64>>
where
    T: Sync,
    F: Fn(&mut Tape, &ParameterSet, &T) -> Result<Var> + Sync,
{
    if items.is_empty() {
        return Err(Error::domain("cannot train on an empty dataset"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::domain("batch size must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let shared: &ParameterSet = params;
            let results: Vec<Result<(f64, Vec<Matrix>)>> = batch
                .par_iter()
                .map(|&i| loss_and_grads(shared, &items[i], &loss))
                .collect();
            let mut sum: Option<Vec<Matrix>> = None;
            for r in results {
                let (value, grads) = r?;
                if !value.is_finite() {
                    return Err(Error::domain(format!("loss diverged (non-finite) at epoch {epoch}")));
                }
                total += value;
                match sum.as_mut() {
                    None => sum = Some(grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&grads) {
                            a.add_assign_scaled(g, 1.0);
                        }
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            let mean: Vec<Matrix> = sum
                .expect("non-empty batch")
                .into_iter()
                .map(|g| g.scale(scale))
                .collect();
            if mean.iter().any(|g| !g.all_finite()) {
                return Err(Error::domain(format!("gradient diverged (non-finite) at epoch {epoch}")));
            }
            params.adam_step(&mean, &cfg.adam)?;
        }
        trace.push(total / items.len() as f64);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(tape: &mut Tape, ps: &ParameterSet, target: &f64) -> Result<Var> {
        let w = tape.param(ps, ps.ids().next().unwrap());
        let shifted = tape.add_const(w, -*target);
        let sq = tape.hadamard(shifted, shifted)?;
        Ok(tape.sum(sq))
    }

    #[test]
    fn converges_to_mean_of_targets() {
        let mut ps = ParameterSet::new();
        let id = ps.add("w", Matrix::zeros(1, 1));
        let cfg = FitConfig {
            epochs: 400,
            batch_size: 2,
            adam: AdamConfig {
                lr: 0.05,
                weight_decay: 0.0,
                ..AdamConfig::default()
            },
            seed: 3,
        };
        let trace = fit(&mut ps, &[1.0, 3.0], &cfg, quadratic).unwrap();
        assert!((ps.value(id)[(0, 0)] - 2.0).abs() < 1e-2);
        assert!(trace.last().unwrap() < &trace[0]);
    }

    #[test]
    fn identical_seeds_give_identical_weights() {
        let run = || {
            let mut ps = ParameterSet::new();
            ps.add("w", Matrix::zeros(1, 1));
            let cfg = FitConfig {
                epochs: 5,
                batch_size: 3,
                ..FitConfig::default()
            };
            fit(&mut ps, &[0.5, -1.0, 2.0, 4.0, 1.5], &cfg, quadratic).unwrap();
            ps
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn divergence_reports_epoch() {
        let mut ps = ParameterSet::new();
        ps.add("w", Matrix::zeros(1, 1));
        let cfg = FitConfig {
            epochs: 2,
            ..FitConfig::default()
        };
        let err = fit(&mut ps, &[f64::NAN], &cfg, quadratic).unwrap_err().to_string();
        assert!(err.contains("epoch 1"), "{err}");
    }
}
