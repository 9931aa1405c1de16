use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{ensure_support, gcn_conv, gcn_normalized_adjacency, mincut_pool, sym_normalize, Activation};
use crate::autodiff::{ParamId, ParameterSet, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::Matrix;
use crate::rewiring::{
    input_dim, node_inputs, CtLayer, CtLayerConfig, CutLossVars, FeatureConfig, GapConfig, GapLayer, GapMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Baseline,
    Ct,
    GapRcut,
    GapNcut,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Baseline, ModelKind::Ct, ModelKind::GapRcut, ModelKind::GapNcut];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Baseline => "baseline",
            ModelKind::Ct => "ct",
            ModelKind::GapRcut => "gap-rcut",
            ModelKind::GapNcut => "gap-ncut",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::domain(format!(
                    "unknown model kind '{s}' (expected baseline, ct, gap-rcut or gap-ncut)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Attribute columns of the input graphs (1 for the injected degree).
    pub attribute_dim: usize,
    pub hidden_dim: usize,
    pub k_pool: usize,
    pub classes: usize,
    pub features: FeatureConfig,
    pub ct: CtLayerConfig,
    /// Step size and loss weight of the gap layer; the mode follows `kind`.
    pub gap: GapConfig,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, attribute_dim: usize, classes: usize) -> Self {
        Self {
            kind,
            attribute_dim,
            hidden_dim: 32,
            k_pool: 8,
            classes,
            features: FeatureConfig::default(),
            ct: CtLayerConfig::default(),
            gap: GapConfig::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.attribute_dim == 0 || self.hidden_dim == 0 || self.k_pool == 0 {
            return Err(Error::domain(format!("model dimensions must be >= 1: {self:?}")));
        }
        if self.classes < 2 {
            return Err(Error::domain(format!("need at least 2 classes, got {}", self.classes)));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        input_dim(self.attribute_dim, &self.features)
    }
}

#[derive(Debug, Clone, Copy)]
struct ConvIds {
    w: ParamId,
    w_self: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone, Copy)]
enum Rewire {
    None,
    Ct(CtLayer),
    Gap(GapLayer),
}

/// Linear → [rewiring layer] → conv → MinCut pool → conv → mean readout →
/// linear classifier.
#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ModelSpec,
    pub params: ParameterSet,
    lin_w: ParamId,
    lin_b: ParamId,
    conv1: ConvIds,
    pool_w: ParamId,
    pool_b: ParamId,
    conv2: ConvIds,
    out_w: ParamId,
    out_b: ParamId,
    rewire: Rewire,
}

/// Tape handles of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ModelVars {
    pub logits: Var,
    pub pool: CutLossVars,
    /// `L_CT` or `L_GAP`; `None` for the baseline.
    pub rewire_loss: Option<Var>,
    /// Propagation matrix fed to the first convolution (before
    /// normalization for rewired kinds).
    pub propagation: Var,
}

fn conv_ids(params: &mut ParameterSet, prefix: &str, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> ConvIds {
    ConvIds {
        w: params.add_glorot(format!("{prefix}.w"), fan_in, fan_out, rng),
        w_self: params.add_glorot(format!("{prefix}.w_self"), fan_in, fan_out, rng),
        b: params.add(format!("{prefix}.b"), Matrix::zeros(1, fan_out)),
    }
}

/// Initializes every parameter of `spec` from `seed`.
pub fn build_model(spec: ModelSpec, seed: u64) -> Result<Model> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParameterSet::new();
    let h = spec.hidden_dim;
    let lin_w = params.add_glorot("lin.w", spec.input_dim(), h, &mut rng);
    let lin_b = params.add("lin.b", Matrix::zeros(1, h));
    let rewire = match spec.kind {
        ModelKind::Baseline => Rewire::None,
        ModelKind::Ct => Rewire::Ct(CtLayer::init(h, spec.ct, &mut params, "ct", &mut rng)?),
        ModelKind::GapRcut | ModelKind::GapNcut => {
            let mode = if spec.kind == ModelKind::GapRcut { GapMode::Rcut } else { GapMode::Ncut };
            let cfg = GapConfig { mode, ..spec.gap };
            Rewire::Gap(GapLayer::init(h, cfg, &mut params, "gap", &mut rng)?)
        }
    };
    let conv1 = conv_ids(&mut params, "conv1", h, h, &mut rng);
    let pool_w = params.add_glorot("pool.w", h, spec.k_pool, &mut rng);
    let pool_b = params.add("pool.b", Matrix::zeros(1, spec.k_pool));
    let conv2 = conv_ids(&mut params, "conv2", h, h, &mut rng);
    let out_w = params.add_glorot("out.w", h, spec.classes, &mut rng);
    let out_b = params.add("out.b", Matrix::zeros(1, spec.classes));
    Ok(Model {
        spec,
        params,
        lin_w,
        lin_b,
        conv1,
        pool_w,
        pool_b,
        conv2,
        out_w,
        out_b,
        rewire,
    })
}

impl Model {
    /// True when the model carries rewiring-layer parameters.
    pub fn has_rewiring(&self) -> bool {
        !matches!(self.rewire, Rewire::None)
    }

    /// Node inputs the model expects for `g`.
    pub fn inputs(&self, g: &Graph) -> Result<Matrix> {
        let x = node_inputs(g, &self.spec.features)?;
        if x.cols() != self.spec.input_dim() {
            return Err(Error::shape(
                "model",
                format!(
                    "graph provides {} input columns, model expects {}",
                    x.cols(),
                    self.spec.input_dim()
                ),
            ));
        }
        Ok(x)
    }

    /// Replaces parameter values by name; names and shapes must match the
    /// model exactly.
    pub fn load_params(&mut self, named: &[(String, Matrix)]) -> Result<()> {
        if named.len() != self.params.len() {
            return Err(Error::domain(format!(
                "checkpoint has {} parameters, model has {}",
                named.len(),
                self.params.len()
            )));
        }
        for (name, value) in named {
            let id = self
                .params
                .find(name)
                .ok_or_else(|| Error::domain(format!("unexpected parameter '{name}'")))?;
            self.params.set_value(id, value.clone())?;
        }
        Ok(())
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParameterSet, g: &Graph, x: &Matrix) -> Result<ModelVars> {
        g.require_connected()?;
        let xv = tape.constant(x.clone());
        let lw = tape.param(params, self.lin_w);
        let lb = tape.param(params, self.lin_b);
        let h0 = tape.matmul(xv, lw)?;
        let h0 = tape.add_row(h0, lb)?;

        let (propagation, normalized, rewire_loss) = match self.rewire {
            Rewire::None => {
                let t = tape.constant(gcn_normalized_adjacency(g.adjacency()));
                (t, t, None)
            }
            Rewire::Ct(layer) => {
                let v = layer.forward(tape, params, g, h0)?;
                ensure_support(tape.value(v.t_ct), g)?;
                (v.t_ct, sym_normalize(tape, v.t_ct)?, Some(v.loss.total))
            }
            Rewire::Gap(layer) => {
                let v = layer.forward(tape, params, g, h0)?;
                ensure_support(tape.value(v.t_gap), g)?;
                (v.t_gap, sym_normalize(tape, v.t_gap)?, Some(v.loss))
            }
        };

        let c1 = self.conv_vars(tape, params, self.conv1);
        let h1 = gcn_conv(tape, normalized, h0, c1.0, c1.1, Some(c1.2), Activation::Relu)?;

        let pw = tape.param(params, self.pool_w);
        let pb = tape.param(params, self.pool_b);
        let s = tape.matmul(h1, pw)?;
        let s = tape.add_row(s, pb)?;
        let s = tape.row_softmax(s);
        let a = tape.constant(g.adjacency().clone());
        let d = tape.constant(Matrix::diag(&g.degrees()));
        let pool = mincut_pool(tape, a, d, h1, s)?;

        // pooled adjacency without self loops, symmetrically normalized
        let k = self.spec.k_pool;
        let off_diag = tape.constant(Matrix::filled(k, k, 1.0).sub(&Matrix::identity(k)));
        let ap = tape.hadamard(pool.a_pooled, off_diag)?;
        let ap = sym_normalize(tape, ap)?;
        let c2 = self.conv_vars(tape, params, self.conv2);
        let h2 = gcn_conv(tape, ap, pool.x_pooled, c2.0, c2.1, Some(c2.2), Activation::Relu)?;

        let mean = tape.constant(Matrix::filled(1, k, 1.0 / k as f64));
        let readout = tape.matmul(mean, h2)?;
        let ow = tape.param(params, self.out_w);
        let ob = tape.param(params, self.out_b);
        let logits = tape.matmul(readout, ow)?;
        let logits = tape.add_row(logits, ob)?;
        debug_assert_eq!(tape.value(logits).shape(), (1, self.spec.classes));
        Ok(ModelVars {
            logits,
            pool: pool.loss,
            rewire_loss,
            propagation,
        })
    }

    fn conv_vars(&self, tape: &mut Tape, params: &ParameterSet, ids: ConvIds) -> (Var, Var, Var) {
        (
            tape.param(params, ids.w),
            tape.param(params, ids.w_self),
            tape.param(params, ids.b),
        )
    }

    /// Cross-entropy plus the pooling and rewiring losses, unit weights.
    pub fn loss(
        &self,
        tape: &mut Tape,
        params: &ParameterSet,
        g: &Graph,
        x: &Matrix,
        label: usize,
        with_rewire_loss: bool,
    ) -> Result<Var> {
        if label >= self.spec.classes {
            return Err(Error::domain(format!(
                "label {label} out of range for {} classes",
                self.spec.classes
            )));
        }
        let v = self.forward(tape, params, g, x)?;
        let ce = tape.cross_entropy(v.logits, &[label])?;
        let mut total = tape.add(ce, v.pool.total)?;
        if let (Some(r), true) = (v.rewire_loss, with_rewire_loss) {
            total = tape.add(total, r)?;
        }
        Ok(total)
    }

    /// Class scores for one graph.
    pub fn logits(&self, g: &Graph) -> Result<Vec<f64>> {
        let x = self.inputs(g)?;
        let mut tape = Tape::new();
        let v = self.forward(&mut tape, &self.params, g, &x)?;
        Ok(tape.value(v.logits).row(0).to_vec())
    }

    pub fn predict(&self, g: &Graph) -> Result<usize> {
        let logits = self.logits(g)?;
        Ok(logits
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &l)| if l > best.1 { (i, l) } else { best })
            .0)
    }
}
