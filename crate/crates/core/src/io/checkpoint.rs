//! Named parameter snapshots.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::report::to_json_string;
use crate::autodiff::ParameterSet;
use crate::error::{Error, Result};
use crate::gnn::{build_model, Model, ModelSpec};
use crate::linalg::Matrix;
use crate::rewiring::{CtLayer, CtLayerConfig, FeatureConfig, GapConfig, GapLayer, TrainedCt, TrainedGap};

const FORMAT: &str = "rewire-checkpoint";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: [usize; 2],
    /// Row-major values.
    pub data: Vec<f64>,
}

/// What was trained (`kind`), how to rebuild it (`config`) and the values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub kind: String,
    pub config: Value,
    pub params: Vec<Tensor>,
}

impl Checkpoint {
    pub fn new(kind: impl Into<String>, config: impl Serialize, params: &ParameterSet) -> Result<Self> {
        Ok(Self {
            format: FORMAT.to_string(),
            kind: kind.into(),
            config: serde_json::to_value(config)?,
            params: params
                .iter()
                .map(|p| Tensor {
                    name: p.name.clone(),
                    shape: [p.value.rows(), p.value.cols()],
                    data: p.value.data().to_vec(),
                })
                .collect(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.format != FORMAT {
            return Err(Error::domain(format!("not a checkpoint (format '{}')", ckpt.format)));
        }
        for t in &ckpt.params {
            if t.data.len() != t.shape[0] * t.shape[1] {
                return Err(Error::domain(format!(
                    "parameter '{}' declares shape {:?} but holds {} values",
                    t.name,
                    t.shape,
                    t.data.len()
                )));
            }
        }
        Ok(ckpt)
    }

    pub fn to_json(&self) -> Result<String> {
        to_json_string(self)
    }

    pub fn require_kind(&self, kind: &str) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::domain(format!("checkpoint holds a '{}' model, expected '{kind}'", self.kind)))
        }
    }

    pub fn config_as<T: for<'de> Deserialize<'de>>(&self) -> Result<T> {
        Ok(serde_json::from_value(self.config.clone())?)
    }

    /// Name/value pairs in checkpoint order.
    pub fn named(&self) -> Vec<(String, Matrix)> {
        self.params
            .iter()
            .map(|t| (t.name.clone(), Matrix::from_vec(t.shape[0], t.shape[1], t.data.clone())))
            .collect()
    }

    /// Overwrites every parameter of `params` with the checkpoint value of
    /// the same name. Names must match one to one and shapes exactly.
    pub fn apply(&self, params: &mut ParameterSet) -> Result<()> {
        for p in params.iter() {
            if !self.params.iter().any(|t| t.name == p.name) {
                return Err(Error::domain(format!("parameter '{}' missing from checkpoint", p.name)));
            }
        }
        for t in &self.params {
            let id = params
                .find(&t.name)
                .ok_or_else(|| Error::domain(format!("checkpoint parameter '{}' is not part of the model", t.name)))?;
            let expected = params.value(id).shape();
            if expected != (t.shape[0], t.shape[1]) {
                return Err(Error::shape(
                    "checkpoint",
                    format!("parameter '{}' is {:?} in the checkpoint, model expects {:?}", t.name, t.shape, expected),
                ));
            }
            params.set_value(id, Matrix::from_vec(t.shape[0], t.shape[1], t.data.clone()))?;
        }
        Ok(())
    }

    /// A fresh parameter set holding exactly the checkpoint values.
    pub fn to_params(&self) -> ParameterSet {
        let mut ps = ParameterSet::new();
        for (name, value) in self.named() {
            ps.add(name, value);
        }
        ps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct LayerConfig<L> {
    layer: L,
    features: FeatureConfig,
    input_dim: usize,
}

impl Checkpoint {
    pub fn from_ct(t: &TrainedCt) -> Result<Self> {
        let cfg = LayerConfig {
            layer: t.layer.cfg,
            features: t.features,
            input_dim: t.input_dim,
        };
        Self::new("ct", cfg, &t.params)
    }

    pub fn from_gap(t: &TrainedGap) -> Result<Self> {
        let cfg = LayerConfig {
            layer: t.layer.cfg,
            features: t.features,
            input_dim: t.input_dim,
        };
        Self::new("gap", cfg, &t.params)
    }

    pub fn from_model(m: &Model) -> Result<Self> {
        Self::new("gnn", m.spec, &m.params)
    }

    pub fn to_ct(&self) -> Result<TrainedCt> {
        self.require_kind("ct")?;
        let cfg: LayerConfig<CtLayerConfig> = self.config_as()?;
        let params = self.to_params();
        let layer = CtLayer::bind(cfg.input_dim, cfg.layer, &params, "ct")?;
        Ok(TrainedCt {
            params,
            layer,
            features: cfg.features,
            input_dim: cfg.input_dim,
            loss_trace: Vec::new(),
        })
    }

    pub fn to_gap(&self) -> Result<TrainedGap> {
        self.require_kind("gap")?;
        let cfg: LayerConfig<GapConfig> = self.config_as()?;
        let params = self.to_params();
        let layer = GapLayer::bind(cfg.input_dim, cfg.layer, &params, "gap")?;
        Ok(TrainedGap {
            params,
            layer,
            features: cfg.features,
            input_dim: cfg.input_dim,
            loss_trace: Vec::new(),
        })
    }

    pub fn to_model(&self) -> Result<Model> {
        self.require_kind("gnn")?;
        let spec: ModelSpec = self.config_as()?;
        let mut model = build_model(spec, 0)?;
        self.apply(&mut model.params)?;
        Ok(model)
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, ckpt.to_json()?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::from_json(&fs::read_to_string(path)?)
}
