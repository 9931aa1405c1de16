use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::Model;
use crate::autodiff::{fit, AdamConfig, FitConfig};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Share of every class placed in the training split.
    pub train_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            weight_decay: 1e-4,
            epochs: 60,
            batch_size: 32,
            seed: 0,
            train_fraction: 0.85,
        }
    }
}

impl TrainConfig {
    fn fit_config(&self) -> FitConfig {
        FitConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                lr: self.lr,
                weight_decay: self.weight_decay,
                ..AdamConfig::default()
            },
            seed: self.seed,
        }
    }
}

/// A labelled graph with its precomputed node inputs.
#[derive(Debug, Clone)]
pub struct Example {
    pub graph: Graph,
    pub inputs: Matrix,
    pub label: usize,
}

fn label_of(g: &Graph, i: usize) -> Result<usize> {
    g.label().ok_or_else(|| Error::domain(format!("graph {i} has no label")))
}

/// Stratified split: each class is shuffled with `seed` and its first
/// `round(fraction · size)` members go to the training side (at least one
/// on each side when the class has two or more graphs).
pub fn stratified_split(labels: &[usize], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::domain(format!("train fraction must lie in (0, 1), got {fraction}")));
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        let mut cut = (fraction * members.len() as f64).round() as usize;
        if members.len() >= 2 {
            cut = cut.clamp(1, members.len() - 1);
        }
        train.extend_from_slice(&members[..cut]);
        test.extend_from_slice(&members[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean training loss of every epoch.
    pub train_loss: Vec<f64>,
    pub train: Evaluation,
    pub test: Evaluation,
}

/// Builds the node inputs of every graph for `model`.
pub fn examples(model: &Model, graphs: &[Graph]) -> Result<Vec<Example>> {
    graphs
        .iter()
        .enumerate()
        .map(|(i, g)| {
            Ok(Example {
                graph: g.clone(),
                inputs: model.inputs(g)?,
                label: label_of(g, i)?,
            })
        })
        .collect()
}

pub fn evaluate(model: &Model, data: &[Example]) -> Result<Evaluation> {
    let classes = model.spec.classes;
    let predictions: Vec<usize> = data
        .par_iter()
        .map(|ex| model.predict(&ex.graph))
        .collect::<Result<_>>()?;
    let mut confusion = vec![vec![0; classes]; classes];
    let mut correct = 0;
    for (ex, &p) in data.iter().zip(&predictions) {
        if ex.label >= classes {
            return Err(Error::domain(format!("label {} out of range for {classes} classes", ex.label)));
        }
        confusion[ex.label][p] += 1;
        correct += usize::from(ex.label == p);
    }
    let accuracy = if data.is_empty() { 0.0 } else { correct as f64 / data.len() as f64 };
    Ok(Evaluation { accuracy, confusion })
}

/// Fits `model` on `train` end to end (classifier, pooling and rewiring
/// losses) and reports accuracies on both splits.
pub fn train(model: &mut Model, train: &[Example], test: &[Example], cfg: &TrainConfig) -> Result<Metrics> {
    let view = model.clone();
    let train_loss = fit(&mut model.params, train, &cfg.fit_config(), |tape, params, ex: &Example| {
        view.loss(tape, params, &ex.graph, &ex.inputs, ex.label, true)
    })?;
    Ok(Metrics {
        train_loss,
        train: evaluate(model, train)?,
        test: evaluate(model, test)?,
    })
}

/// Splits `graphs` with [`stratified_split`] and runs [`train`].
pub fn train_on_dataset(model: &mut Model, graphs: &[Graph], cfg: &TrainConfig) -> Result<Metrics> {
    let data = examples(model, graphs)?;
    let labels: Vec<usize> = data.iter().map(|e| e.label).collect();
    let (tr, te) = stratified_split(&labels, cfg.train_fraction, cfg.seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| data[i].clone()).collect::<Vec<_>>();
    train(model, &pick(&tr), &pick(&te), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use crate::gnn::{build_model, ModelKind, ModelSpec};
    use crate::graph::{gen_er, gen_named};

    #[test]
    fn split_is_stratified_and_disjoint() {
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let (tr, te) = stratified_split(&labels, 0.85, 3).unwrap();
        assert_eq!(tr.len() + te.len(), 40);
        assert_eq!(tr.iter().filter(|&&i| labels[i] == 0).count(), 17);
        assert_eq!(te.iter().filter(|&&i| labels[i] == 1).count(), 3);
        assert!(tr.iter().all(|i| !te.contains(i)));
        assert!(stratified_split(&labels, 1.0, 0).is_err());
    }

    #[test]
    fn memorizes_a_single_graph() {
        for kind in [ModelKind::Baseline, ModelKind::Ct, ModelKind::GapRcut] {
            let g = gen_named("barbell6").unwrap().with_label(1);
            let mut m = build_model(ModelSpec::new(kind, 1, 2), 0).unwrap();
            let data = examples(&m, &[g]).unwrap();
            let cfg = TrainConfig {
                lr: 1e-2,
                epochs: 200,
                batch_size: 1,
                ..TrainConfig::default()
            };
            let metrics = train(&mut m, &data, &[], &cfg).unwrap();
            assert_eq!(metrics.train.accuracy, 1.0, "{kind}");
            assert!(metrics.train_loss.last() < metrics.train_loss.first(), "{kind}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let graphs: Vec<Graph> = (0..12)
            .map(|i| gen_er(12, if i % 2 == 0 { 0.3 } else { 0.7 }, i).unwrap().with_label(i as usize % 2))
            .collect();
        let run = || {
            let mut m = build_model(ModelSpec::new(ModelKind::GapNcut, 1, 2), 5).unwrap();
            let cfg = TrainConfig { epochs: 3, batch_size: 4, ..TrainConfig::default() };
            let metrics = train_on_dataset(&mut m, &graphs, &cfg).unwrap();
            (metrics, m.params.iter().map(|p| p.value.clone()).collect::<Vec<_>>())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn gradients_reach_every_parameter() {
        let g = gen_er(10, 0.5, 1).unwrap();
        for kind in ModelKind::ALL {
            let m = build_model(ModelSpec::new(kind, 1, 2), 7).unwrap();
            let x = m.inputs(&g).unwrap();
            let mut tape = Tape::new();
            let l = m.loss(&mut tape, &m.params, &g, &x, 0, true).unwrap();
            let grads = tape.backward(l).unwrap().for_params(&m.params);
            for (p, gr) in m.params.iter().zip(&grads) {
                // mu is fixed unless learn_mu is set, so every listed parameter trains
                assert!(gr.data().iter().any(|v| *v != 0.0), "{kind}: no gradient for {}", p.name);
            }
        }
    }
}
