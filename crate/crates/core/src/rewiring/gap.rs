//! The spectral-gap layer: a soft two-way assignment whose approximate
//! Fiedler vector drives one closed-form gradient step on the adjacency.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ct::prepare_inputs;
use super::cut::cut_loss;
use super::features::{node_inputs, FeatureConfig};
use crate::autodiff::{fit, FitConfig, MLPConfig, Mlp, OutputActivation, ParamId, ParameterSet, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{laplacian, normalized_laplacian, Graph};
use crate::linalg::Matrix;

const RAYLEIGH_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapMode {
    Rcut,
    Ncut,
}

impl fmt::Display for GapMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GapMode::Rcut => "rcut",
            GapMode::Ncut => "ncut",
        })
    }
}

impl FromStr for GapMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rcut" => Ok(GapMode::Rcut),
            "ncut" => Ok(GapMode::Ncut),
            other => Err(Error::domain(format!("unknown gap mode '{other}' (expected rcut or ncut)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapConfig {
    pub mode: GapMode,
    /// Step size of the gradient step `Ã = relu(A − μ∇)`.
    pub mu: f64,
    /// Weight of the squared Rayleigh quotient in the Fiedler loss.
    pub alpha: f64,
    /// Train μ through a softplus reparametrization.
    pub learn_mu: bool,
    pub hidden_dim: usize,
}

impl Default for GapConfig {
    fn default() -> Self {
        Self {
            mode: GapMode::Rcut,
            mu: 0.5,
            alpha: 1.0,
            learn_mu: false,
            hidden_dim: 32,
        }
    }
}

impl GapConfig {
    pub fn with_mode(mode: GapMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::domain(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::domain(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GapLayerVars {
    pub s: Var,
    pub f2: Var,
    pub a_tilde: Var,
    pub t_gap: Var,
    pub lambda: Var,
    pub loss_cut: Var,
    pub loss_fiedler: Var,
    pub loss: Var,
}

/// Materialized forward pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapLayerOutput {
    pub s: Matrix,
    pub f2_approx: Vec<f64>,
    pub a_tilde: Matrix,
    pub t_gap: Matrix,
    pub lambda_approx: f64,
    pub loss_gap: f64,
    pub loss_cut: f64,
    pub loss_fiedler: f64,
    pub mode: GapMode,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct GapLayer {
    pub mlp: Mlp,
    pub cfg: GapConfig,
    mu_raw: Option<ParamId>,
}

fn softplus_inverse(y: f64) -> f64 {
    y + (-(-y).exp_m1()).ln()
}

impl GapLayer {
    fn mlp_config(input_dim: usize, cfg: &GapConfig) -> MLPConfig {
        MLPConfig {
            input_dim,
            hidden_dim: cfg.hidden_dim,
            output_dim: 2,
            output: OutputActivation::RowSoftmax,
        }
    }

    pub fn init(
        input_dim: usize,
        cfg: GapConfig,
        params: &mut ParameterSet,
        prefix: &str,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let mlp = Mlp::init(Self::mlp_config(input_dim, &cfg), params, prefix, rng)?;
        let mu_raw = cfg
            .learn_mu
            .then(|| params.add(format!("{prefix}.mu"), Matrix::filled(1, 1, softplus_inverse(cfg.mu))));
        Ok(Self { mlp, cfg, mu_raw })
    }

    pub fn bind(input_dim: usize, cfg: GapConfig, params: &ParameterSet, prefix: &str) -> Result<Self> {
        cfg.validate()?;
        let mlp = Mlp::bind(Self::mlp_config(input_dim, &cfg), params, prefix)?;
        let mu_raw = if cfg.learn_mu {
            let name = format!("{prefix}.mu");
            Some(
                params
                    .find(&name)
                    .ok_or_else(|| Error::domain(format!("missing parameter '{name}'")))?,
            )
        } else {
            None
        };
        Ok(Self { mlp, cfg, mu_raw })
    }

    /// Current step size (after the softplus when learnable).
    pub fn mu(&self, params: &ParameterSet) -> f64 {
        match self.mu_raw {
            Some(id) => {
                let x = params.value(id)[(0, 0)];
                if x > 30.0 {
                    x
                } else {
                    x.exp().ln_1p()
                }
            }
            None => self.cfg.mu,
        }
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParameterSet, g: &Graph, x: Var) -> Result<GapLayerVars> {
        g.require_connected()?;
        let n = g.n();
        let degrees = g.degrees();
        let a = tape.constant(g.adjacency().clone());
        let d = tape.constant(Matrix::diag(&degrees));

        let s = self.mlp.forward(tape, params, x)?;
        let cut = cut_loss(tape, s, a, d)?;

        let r = 1.0 / (n as f64).sqrt();
        let proj = tape.constant(Matrix::from_rows(&[[r], [-r]]));
        let f = tape.matmul(s, proj)?;
        let ft = tape.transpose(f);

        let grad = match self.cfg.mode {
            GapMode::Rcut => {
                let sq = tape.hadamard(f, f)?;
                let ones = tape.constant(Matrix::filled(1, n, 1.0));
                let spread = tape.matmul(sq, ones)?;
                let outer = tape.matmul(f, ft)?;
                tape.sub(spread, outer)?
            }
            GapMode::Ncut => {
                let sqrt_d: Vec<f64> = degrees.iter().map(|x| x.sqrt()).collect();
                let mut dha = g.adjacency().clone();
                for u in 0..n {
                    dha.row_mut(u).iter_mut().for_each(|x| *x *= sqrt_d[u]);
                }
                let dha = tape.constant(dha);
                let af = tape.matmul(dha, f)?;
                let energy = tape.matmul(ft, af)?;
                let mut d_prime = Matrix::zeros(n, n);
                for u in 0..n {
                    let dp = -0.5 * degrees[u].powf(-1.5);
                    d_prime.row_mut(u).iter_mut().for_each(|x| *x = 2.0 * dp);
                }
                let d_prime = tape.constant(d_prime);
                let first = tape.scalar_mul(d_prime, energy)?;
                let inv_sqrt = tape.constant(Matrix::column(&sqrt_d.iter().map(|x| 1.0 / x).collect::<Vec<_>>()));
                let scaled = tape.hadamard(f, inv_sqrt)?;
                let scaled_t = tape.transpose(scaled);
                let second = tape.matmul(scaled, scaled_t)?;
                tape.add(first, second)?
            }
        };

        let step = match self.mu_raw {
            Some(id) => {
                let raw = tape.param(params, id);
                let mu = tape.softplus(raw);
                tape.scalar_mul(grad, mu)?
            }
            None => tape.scale(grad, self.cfg.mu),
        };
        let shifted = tape.sub(a, step)?;
        let a_tilde = tape.relu(shifted);

        let mask = tape.constant(g.adjacency().map(|w| if w != 0.0 { 1.0 } else { 0.0 }));
        let masked = tape.hadamard(a_tilde, mask)?;
        let masked_t = tape.transpose(masked);
        let both = tape.add(masked, masked_t)?;
        let t_gap = tape.scale(both, 0.5);

        // Rayleigh quotient of f against L (or of D^{1/2} f against the
        // normalized Laplacian), taken on the part of f orthogonal to the
        // trivial eigenvector: a constant assignment would otherwise score 0.
        let weights: Vec<f64> = match self.cfg.mode {
            GapMode::Rcut => vec![1.0 / n as f64; n],
            GapMode::Ncut => degrees.iter().map(|d| d / g.volume()).collect(),
        };
        let mut centre = Matrix::identity(n);
        for u in 0..n {
            for w in 0..n {
                centre[(u, w)] -= weights[w];
            }
        }
        let centre = tape.constant(centre);
        let fc = tape.matmul(centre, f)?;
        let (vec, lap) = match self.cfg.mode {
            GapMode::Rcut => (fc, laplacian(g)),
            GapMode::Ncut => {
                let sqrt_d = tape.constant(Matrix::column(&degrees.iter().map(|x| x.sqrt()).collect::<Vec<_>>()));
                (tape.hadamard(fc, sqrt_d)?, normalized_laplacian(g)?)
            }
        };
        let lap = tape.constant(lap);
        let vec_t = tape.transpose(vec);
        let lv = tape.matmul(lap, vec)?;
        let num = tape.matmul(vec_t, lv)?;
        let den = tape.matmul(vec_t, vec)?;
        let den = tape.add_const(den, RAYLEIGH_GUARD);
        let lambda = tape.scalar_div(num, den)?;

        let change = tape.sub(a_tilde, a)?;
        let change = tape.frobenius_norm(change);
        let lambda_sq = tape.hadamard(lambda, lambda)?;
        let lambda_sq = tape.scale(lambda_sq, self.cfg.alpha);
        let loss_fiedler = tape.add(change, lambda_sq)?;
        let loss = tape.add(cut.total, loss_fiedler)?;
        Ok(GapLayerVars {
            s,
            f2: f,
            a_tilde,
            t_gap,
            lambda,
            loss_cut: cut.total,
            loss_fiedler,
            loss,
        })
    }
}

/// Runs the layer on `g` with inputs `x` and materializes the result.
pub fn gap_layer_forward(g: &Graph, x: &Matrix, layer: &GapLayer, params: &ParameterSet) -> Result<GapLayerOutput> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let v = layer.forward(&mut tape, params, g, xv)?;
    Ok(GapLayerOutput {
        s: tape.value(v.s).clone(),
        f2_approx: tape.value(v.f2).col(0),
        a_tilde: tape.value(v.a_tilde).clone(),
        t_gap: tape.value(v.t_gap).clone(),
        lambda_approx: tape.scalar(v.lambda),
        loss_gap: tape.scalar(v.loss),
        loss_cut: tape.scalar(v.loss_cut),
        loss_fiedler: tape.scalar(v.loss_fiedler),
        mode: layer.cfg.mode,
        mu: layer.mu(params),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapTrainConfig {
    pub layer: GapConfig,
    pub features: FeatureConfig,
    pub fit: FitConfig,
}

impl Default for GapTrainConfig {
    fn default() -> Self {
        let mut fit = FitConfig {
            epochs: 100,
            batch_size: 8,
            ..FitConfig::default()
        };
        fit.adam.lr = 5e-3;
        Self {
            layer: GapConfig::default(),
            features: FeatureConfig::default(),
            fit,
        }
    }
}

/// A trained spectral-gap layer, usable on unseen graphs.
#[derive(Debug, Clone)]
pub struct TrainedGap {
    pub params: ParameterSet,
    pub layer: GapLayer,
    pub features: FeatureConfig,
    pub input_dim: usize,
    pub loss_trace: Vec<f64>,
}

impl TrainedGap {
    pub fn forward(&self, g: &Graph) -> Result<GapLayerOutput> {
        let x = node_inputs(g, &self.features)?;
        if x.cols() != self.input_dim {
            return Err(Error::shape(
                "gap_layer_forward",
                format!("graph provides {} input columns, layer expects {}", x.cols(), self.input_dim),
            ));
        }
        gap_layer_forward(g, &x, &self.layer, &self.params)
    }

    /// `g` reweighted by its diffusion matrix.
    pub fn rewire(&self, g: &Graph) -> Result<Graph> {
        g.reweighted(self.forward(g)?.t_gap)
    }
}

/// Minimizes the mean spectral-gap loss over `graphs`.
pub fn train_gap_layer(graphs: &[Graph], cfg: &GapTrainConfig) -> Result<TrainedGap> {
    let (inputs, input_dim) = prepare_inputs(graphs, &cfg.features)?;
    let mut params = ParameterSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.fit.seed);
    let layer = GapLayer::init(input_dim, cfg.layer, &mut params, "gap", &mut rng)?;
    let items: Vec<(&Graph, &Matrix)> = graphs.iter().zip(&inputs).collect();
    let loss_trace = fit(&mut params, &items, &cfg.fit, |tape, ps, (g, x)| {
        let xv = tape.constant((*x).clone());
        Ok(layer.forward(tape, ps, g, xv)?.loss)
    })?;
    Ok(TrainedGap {
        params,
        layer,
        features: cfg.features,
        input_dim,
        loss_trace,
    })
}
