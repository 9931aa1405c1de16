use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{ParamId, ParameterSet};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputActivation {
    Tanh,
    RowSoftmax,
}

/// One-hidden-layer perceptron `act(tanh(X W1 + b1) W2 + b2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MLPConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub output: OutputActivation,
}

impl MLPConfig {
    pub fn new(input_dim: usize, output_dim: usize, output: OutputActivation) -> Self {
        Self {
            input_dim,
            hidden_dim: 32,
            output_dim,
            output,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.output_dim == 0 {
            return Err(Error::domain(format!("MLP dimensions must be >= 1, got {self:?}")));
        }
        Ok(())
    }
}

/// Parameter handles of an [`MLPConfig`] registered in a [`ParameterSet`].
#[derive(Debug, Clone, Copy)]
pub struct Mlp {
    pub cfg: MLPConfig,
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

impl Mlp {
    /// Registers `{prefix}.w1`, `{prefix}.b1`, `{prefix}.w2`, `{prefix}.b2`.
    pub fn init(cfg: MLPConfig, params: &mut ParameterSet, prefix: &str, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let w1 = params.add_glorot(format!("{prefix}.w1"), cfg.input_dim, cfg.hidden_dim, rng);
        let b1 = params.add(format!("{prefix}.b1"), Matrix::zeros(1, cfg.hidden_dim));
        let w2 = params.add_glorot(format!("{prefix}.w2"), cfg.hidden_dim, cfg.output_dim, rng);
        let b2 = params.add(format!("{prefix}.b2"), Matrix::zeros(1, cfg.output_dim));
        Ok(Self { cfg, w1, b1, w2, b2 })
    }

    /// Looks up an already-registered MLP (e.g. after loading a checkpoint)
    /// and checks its shapes against `cfg`.
    pub fn bind(cfg: MLPConfig, params: &ParameterSet, prefix: &str) -> Result<Self> {
        cfg.validate()?;
        let lookup = |suffix: &str, shape: (usize, usize)| -> Result<ParamId> {
            let name = format!("{prefix}.{suffix}");
            let id = params
                .find(&name)
                .ok_or_else(|| Error::domain(format!("missing parameter '{name}'")))?;
            if params.value(id).shape() != shape {
                return Err(Error::shape(
                    "bind",
                    format!(
                        "parameter '{name}' is {:?}, expected {:?}",
                        params.value(id).shape(),
                        shape
                    ),
                ));
            }
            Ok(id)
        };
        Ok(Self {
            cfg,
            w1: lookup("w1", (cfg.input_dim, cfg.hidden_dim))?,
            b1: lookup("b1", (1, cfg.hidden_dim))?,
            w2: lookup("w2", (cfg.hidden_dim, cfg.output_dim))?,
            b2: lookup("b2", (1, cfg.output_dim))?,
        })
    }

    pub fn param_ids(&self) -> [ParamId; 4] {
        [self.w1, self.b1, self.w2, self.b2]
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParameterSet, x: Var) -> Result<Var> {
        let cols = tape.value(x).cols();
        if cols != self.cfg.input_dim {
            return Err(Error::shape(
                "mlp_forward",
                format!("input has {cols} columns, MLP expects {}", self.cfg.input_dim),
            ));
        }
        let w1 = tape.param(params, self.w1);
        let b1 = tape.param(params, self.b1);
        let w2 = tape.param(params, self.w2);
        let b2 = tape.param(params, self.b2);
        let h = tape.matmul(x, w1)?;
        let h = tape.add_row(h, b1)?;
        let h = tape.tanh(h);
        let o = tape.matmul(h, w2)?;
        let o = tape.add_row(o, b2)?;
        Ok(match self.cfg.output {
            OutputActivation::Tanh => tape.tanh(o),
            OutputActivation::RowSoftmax => tape.row_softmax(o),
        })
    }
}

/// Evaluates the MLP on `x` without keeping the tape.
pub fn mlp_forward(mlp: &Mlp, params: &ParameterSet, x: &Matrix) -> Result<Matrix> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let out = mlp.forward(&mut tape, params, xv)?;
    Ok(tape.value(out).clone())
}
