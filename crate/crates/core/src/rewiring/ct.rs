//! The commute-time layer: an MLP embedding trained with the trace-quotient
//! loss, whose pairwise distances reweight the input edges.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{node_inputs, FeatureConfig};
use crate::autodiff::{fit, FitConfig, MLPConfig, Mlp, OutputActivation, ParameterSet, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{laplacian, Graph};
use crate::linalg::Matrix;

/// Denominator guard used inside the layer so a collapsed embedding still
/// yields a finite loss.
const LAYER_GUARD: f64 = 1e-12;

/// Value of the trace-quotient loss split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CtLoss {
    pub quotient: f64,
    pub orthogonality: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CtLossVars {
    pub quotient: Var,
    pub orthogonality: Var,
    pub total: Var,
}

fn ct_loss_impl(tape: &mut Tape, z: Var, l: Var, d: Var, guarded: bool) -> Result<CtLossVars> {
    let k = tape.value(z).cols();
    let zt = tape.transpose(z);
    let lz = tape.matmul(l, z)?;
    let num = tape.matmul(zt, lz)?;
    let num = tape.trace(num)?;
    let dz = tape.matmul(d, z)?;
    let den = tape.matmul(zt, dz)?;
    let mut den = tape.trace(den)?;
    let gram = tape.matmul(zt, z)?;
    let mut gram_norm = tape.frobenius_norm(gram);
    if guarded {
        den = tape.add_const(den, LAYER_GUARD);
        gram_norm = tape.add_const(gram_norm, LAYER_GUARD);
    } else if !(tape.scalar(den) > 1e-12) {
        return Err(Error::domain(format!(
            "collapsed embedding: Tr[Z^T D Z] = {:e}",
            tape.scalar(den)
        )));
    }
    let quotient = tape.scalar_div(num, den)?;
    let normalized = tape.scalar_div(gram, gram_norm)?;
    let eye = tape.constant(Matrix::identity(k));
    let diff = tape.sub(normalized, eye)?;
    let orthogonality = tape.frobenius_norm(diff);
    let total = tape.add(quotient, orthogonality)?;
    Ok(CtLossVars {
        quotient,
        orthogonality,
        total,
    })
}

/// `Tr[ZᵀLZ]/Tr[ZᵀDZ] + ‖ZᵀZ/‖ZᵀZ‖_F − I_k‖_F` on the tape.
pub fn ct_loss_vars(tape: &mut Tape, z: Var, l: Var, d: Var) -> Result<CtLossVars> {
    ct_loss_impl(tape, z, l, d, false)
}

/// Evaluates the trace-quotient loss of a fixed embedding `z` (n×k).
pub fn ct_loss(z: &Matrix, l: &Matrix, d: &Matrix) -> Result<CtLoss> {
    let n = z.rows();
    if l.shape() != (n, n) || d.shape() != (n, n) {
        return Err(Error::shape(
            "ct_loss",
            format!("Z is {:?}, L is {:?}, D is {:?}", z.shape(), l.shape(), d.shape()),
        ));
    }
    let mut tape = Tape::new();
    let (zv, lv, dv) = (tape.constant(z.clone()), tape.constant(l.clone()), tape.constant(d.clone()));
    let vars = ct_loss_vars(&mut tape, zv, lv, dv)?;
    Ok(CtLoss {
        quotient: tape.scalar(vars.quotient),
        orthogonality: tape.scalar(vars.orthogonality),
        total: tape.scalar(vars.total),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CtLayerConfig {
    pub hidden_dim: usize,
    /// Embedding width.
    pub k: usize,
    /// Use squared distances in `R(Z)` instead of plain Euclidean ones.
    pub squared: bool,
}

impl Default for CtLayerConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 32,
            k: 32,
            squared: false,
        }
    }
}

/// Tape handles produced by one forward pass of the layer.
#[derive(Debug, Clone, Copy)]
pub struct CtLayerVars {
    pub z: Var,
    pub t_ct: Var,
    pub loss: CtLossVars,
}

/// Materialized forward pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CTLayerOutput {
    pub z: Matrix,
    pub t_ct: Matrix,
    pub loss_ct: f64,
    pub quotient: f64,
    pub orthogonality: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CtLayer {
    pub mlp: Mlp,
    pub cfg: CtLayerConfig,
}

impl CtLayer {
    fn mlp_config(input_dim: usize, cfg: &CtLayerConfig) -> MLPConfig {
        MLPConfig {
            input_dim,
            hidden_dim: cfg.hidden_dim,
            output_dim: cfg.k,
            output: OutputActivation::Tanh,
        }
    }

    pub fn init(
        input_dim: usize,
        cfg: CtLayerConfig,
        params: &mut ParameterSet,
        prefix: &str,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let mlp = Mlp::init(Self::mlp_config(input_dim, &cfg), params, prefix, rng)?;
        Ok(Self { mlp, cfg })
    }

    pub fn bind(input_dim: usize, cfg: CtLayerConfig, params: &ParameterSet, prefix: &str) -> Result<Self> {
        let mlp = Mlp::bind(Self::mlp_config(input_dim, &cfg), params, prefix)?;
        Ok(Self { mlp, cfg })
    }

    /// `Z = tanh(MLP(X))`, `T_ct = R(Z) ⊙ A` with `R(Z) = cdist(Z)/vol(G)`.
    ///
    /// The loss is evaluated on the degree-centred embedding
    /// `(I − 1dᵀ/vol) Z`. Distances are unaffected by the shift, but
    /// without it the constant embedding would be a trivial minimizer of
    /// the quotient term.
    pub fn forward(&self, tape: &mut Tape, params: &ParameterSet, g: &Graph, x: Var) -> Result<CtLayerVars> {
        g.require_connected()?;
        let n = g.n();
        let degrees = g.degrees();
        let volume = g.volume();
        let z = self.mlp.forward(tape, params, x)?;

        let dist = if self.cfg.squared { tape.cdist_sq(z) } else { tape.cdist(z) };
        let r = tape.scale(dist, 1.0 / volume);
        let a = tape.constant(g.adjacency().clone());
        let t_ct = tape.hadamard(r, a)?;

        let mut centre = Matrix::identity(n);
        for u in 0..n {
            for w in 0..n {
                centre[(u, w)] -= degrees[w] / volume;
            }
        }
        let centre = tape.constant(centre);
        let zc = tape.matmul(centre, z)?;
        let l = tape.constant(laplacian(g));
        let d = tape.constant(Matrix::diag(&degrees));
        let loss = ct_loss_impl(tape, zc, l, d, true)?;
        Ok(CtLayerVars { z, t_ct, loss })
    }
}

/// Runs the layer on `g` with inputs `x` and materializes the result.
pub fn ct_layer_forward(g: &Graph, x: &Matrix, layer: &CtLayer, params: &ParameterSet) -> Result<CTLayerOutput> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let vars = layer.forward(&mut tape, params, g, xv)?;
    Ok(CTLayerOutput {
        z: tape.value(vars.z).clone(),
        t_ct: tape.value(vars.t_ct).clone(),
        loss_ct: tape.scalar(vars.loss.total),
        quotient: tape.scalar(vars.loss.quotient),
        orthogonality: tape.scalar(vars.loss.orthogonality),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CtTrainConfig {
    pub layer: CtLayerConfig,
    pub features: FeatureConfig,
    pub fit: FitConfig,
}

impl Default for CtTrainConfig {
    fn default() -> Self {
        let mut fit = FitConfig {
            epochs: 100,
            batch_size: 8,
            ..FitConfig::default()
        };
        fit.adam.lr = 5e-3;
        Self {
            layer: CtLayerConfig::default(),
            features: FeatureConfig::default(),
            fit,
        }
    }
}

/// A trained commute-time layer, usable on unseen graphs.
#[derive(Debug, Clone)]
pub struct TrainedCt {
    pub params: ParameterSet,
    pub layer: CtLayer,
    pub features: FeatureConfig,
    pub input_dim: usize,
    /// Mean loss per epoch.
    pub loss_trace: Vec<f64>,
}

impl TrainedCt {
    pub fn forward(&self, g: &Graph) -> Result<CTLayerOutput> {
        let x = node_inputs(g, &self.features)?;
        if x.cols() != self.input_dim {
            return Err(Error::shape(
                "ct_layer_forward",
                format!("graph provides {} input columns, layer expects {}", x.cols(), self.input_dim),
            ));
        }
        ct_layer_forward(g, &x, &self.layer, &self.params)
    }
}

pub(crate) fn prepare_inputs(graphs: &[Graph], features: &FeatureConfig) -> Result<(Vec<Matrix>, usize)> {
    if graphs.is_empty() {
        return Err(Error::domain("empty training set"));
    }
    let mut inputs = Vec::with_capacity(graphs.len());
    for (i, g) in graphs.iter().enumerate() {
        if !g.is_connected() {
            return Err(Error::domain(format!("training graph {i} is disconnected")));
        }
        inputs.push(node_inputs(g, features)?);
    }
    let dim = inputs[0].cols();
    if let Some(i) = inputs.iter().position(|x| x.cols() != dim) {
        return Err(Error::shape(
            "train",
            format!("graph {i} has {} input columns, graph 0 has {dim}", inputs[i].cols()),
        ));
    }
    Ok((inputs, dim))
}

/// Minimizes the mean trace-quotient loss over `graphs`.
pub fn train_ct_embedder(graphs: &[Graph], cfg: &CtTrainConfig) -> Result<TrainedCt> {
    let (inputs, input_dim) = prepare_inputs(graphs, &cfg.features)?;
    let mut params = ParameterSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.fit.seed);
    let layer = CtLayer::init(input_dim, cfg.layer, &mut params, "ct", &mut rng)?;
    let items: Vec<(&Graph, &Matrix)> = graphs.iter().zip(&inputs).collect();
    let loss_trace = fit(&mut params, &items, &cfg.fit, |tape, ps, (g, x)| {
        let xv = tape.constant((*x).clone());
        Ok(layer.forward(tape, ps, g, xv)?.loss.total)
    })?;
    Ok(TrainedCt {
        params,
        layer,
        features: cfg.features,
        input_dim,
        loss_trace,
    })
}
