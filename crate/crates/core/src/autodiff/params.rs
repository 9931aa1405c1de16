use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Index of a parameter inside its [`ParameterSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A named trainable matrix with its Adam moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Matrix,
    pub m: Matrix,
    pub v: Matrix,
}

/// Named parameters plus optimizer state. Shapes are fixed once added.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterSet {
    params: Vec<Parameter>,
    step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter. Panics if the name is already taken.
    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        let name = name.into();
        assert!(
            self.find(&name).is_none(),
            "parameter '{name}' registered twice"
        );
        let (r, c) = value.shape();
        self.params.push(Parameter {
            name,
            value,
            m: Matrix::zeros(r, c),
            v: Matrix::zeros(r, c),
        });
        ParamId(self.params.len() - 1)
    }

    /// Uniform init in `±√(6 / (fan_in + fan_out))`.
    pub fn add_glorot(
        &mut self,
        name: impl Into<String>,
        fan_in: usize,
        fan_out: usize,
        rng: &mut impl Rng,
    ) -> ParamId {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        self.add(name, Matrix::from_vec(fan_in, fan_out, data))
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    /// Overwrites a value; the shape must not change.
    pub fn set_value(&mut self, id: ParamId, value: Matrix) -> Result<()> {
        let p = &mut self.params[id.0];
        if p.value.shape() != value.shape() {
            return Err(Error::shape(
                "set_value",
                format!(
                    "parameter '{}' is {:?}, got {:?}",
                    p.name,
                    p.value.shape(),
                    value.shape()
                ),
            ));
        }
        p.value = value;
        Ok(())
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.params[id.0].value
    }

    /// Total number of scalar entries.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.data().len()).sum()
    }

    /// One Adam update, followed by decoupled weight decay
    /// `θ ← θ − lr · wd · θ`.
    pub fn adam_step(&mut self, grads: &[Matrix], cfg: &AdamConfig) -> Result<()> {
        if grads.len() != self.params.len() {
            return Err(Error::shape(
                "adam_step",
                format!("{} gradients for {} parameters", grads.len(), self.params.len()),
            ));
        }
        for (p, g) in self.params.iter().zip(grads) {
            if p.value.shape() != g.shape() {
                return Err(Error::shape(
                    "adam_step",
                    format!("gradient {:?} for parameter '{}' {:?}", g.shape(), p.name, p.value.shape()),
                ));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for (p, g) in self.params.iter_mut().zip(grads) {
            let value = p.value.data_mut();
            let m = p.m.data_mut();
            let v = p.v.data_mut();
            for i in 0..value.len() {
                let gi = g.data()[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                value[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
                value[i] -= cfg.lr * cfg.weight_decay * value[i];
            }
        }
        Ok(())
    }
}
