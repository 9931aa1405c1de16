use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::Matrix;
use crate::rewiring::{cut_loss, CutLossVars};

/// Added to row sums before `^(-1/2)` so all-zero rows stay finite.
const NORMALIZE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Identity => x,
        }
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}`, the propagation matrix of the baseline.
pub fn gcn_normalized_adjacency(a: &Matrix) -> Matrix {
    let n = a.rows();
    let with_loops = a.add(&Matrix::identity(n));
    let inv: Vec<f64> = (0..n)
        .map(|u| with_loops.row(u).iter().sum::<f64>().powf(-0.5))
        .collect();
    let mut out = with_loops;
    for u in 0..n {
        for v in 0..n {
            out[(u, v)] *= inv[u] * inv[v];
        }
    }
    out
}

/// `D_T^{-1/2} T D_T^{-1/2}` on the tape, `D_T` the row sums of `T`.
pub fn sym_normalize(tape: &mut Tape, t: Var) -> Result<Var> {
    let n = tape.value(t).rows();
    let ones = tape.constant(Matrix::filled(n, 1, 1.0));
    let deg = tape.matmul(t, ones)?;
    let deg = tape.add_const(deg, NORMALIZE_EPS);
    let inv = tape.powf(deg, -0.5);
    let inv_t = tape.transpose(inv);
    let outer = tape.matmul(inv, inv_t)?;
    tape.hadamard(t, outer)
}

/// `act(T X W + X W_self + b)`.
pub fn gcn_conv(
    tape: &mut Tape,
    t: Var,
    x: Var,
    w: Var,
    w_self: Var,
    bias: Option<Var>,
    act: Activation,
) -> Result<Var> {
    let xw = tape.matmul(x, w)?;
    let msg = tape.matmul(t, xw)?;
    let own = tape.matmul(x, w_self)?;
    let mut h = tape.add(msg, own)?;
    if let Some(b) = bias {
        h = tape.add_row(h, b)?;
    }
    Ok(act.apply(tape, h))
}

/// Fails unless every nonzero of `t` is an edge of `g`.
pub fn ensure_support(t: &Matrix, g: &Graph) -> Result<()> {
    let n = g.n();
    if t.shape() != (n, n) {
        return Err(Error::shape(
            "gcn_conv",
            format!("propagation matrix is {:?} for {n} nodes", t.shape()),
        ));
    }
    for u in 0..n {
        for v in 0..n {
            if t[(u, v)] != 0.0 && !g.has_edge(u, v) {
                return Err(Error::domain(format!(
                    "propagation matrix has weight at ({u}, {v}), which is not an edge"
                )));
            }
        }
    }
    Ok(())
}

/// Dense convenience wrapper around [`gcn_conv`]. When `support` is given,
/// `t` must be supported on its edges (the contract for rewired kinds).
pub fn gcn_conv_dense(
    t: &Matrix,
    x: &Matrix,
    w: &Matrix,
    w_self: &Matrix,
    act: Activation,
    support: Option<&Graph>,
) -> Result<Matrix> {
    if let Some(g) = support {
        ensure_support(t, g)?;
    }
    let mut tape = Tape::new();
    let (tv, xv, wv, sv) = (
        tape.constant(t.clone()),
        tape.constant(x.clone()),
        tape.constant(w.clone()),
        tape.constant(w_self.clone()),
    );
    let out = gcn_conv(&mut tape, tv, xv, wv, sv, None, act)?;
    Ok(tape.value(out).clone())
}

#[derive(Debug, Clone, Copy)]
pub struct PoolVars {
    pub a_pooled: Var,
    pub x_pooled: Var,
    pub loss: CutLossVars,
}

/// `A' = SᵀAS`, `X' = SᵀX` and the two cut-loss terms of `S` (n×k).
pub fn mincut_pool(tape: &mut Tape, a: Var, d: Var, x: Var, s: Var) -> Result<PoolVars> {
    let st = tape.transpose(s);
    let as_ = tape.matmul(a, s)?;
    let a_pooled = tape.matmul(st, as_)?;
    let x_pooled = tape.matmul(st, x)?;
    let loss = cut_loss(tape, s, a, d)?;
    Ok(PoolVars {
        a_pooled,
        x_pooled,
        loss,
    })
}

/// Materialized [`mincut_pool`].
#[derive(Debug, Clone, PartialEq)]
pub struct PoolOutput {
    pub a_pooled: Matrix,
    pub x_pooled: Matrix,
    pub cut: f64,
    pub orthogonality: f64,
}

pub fn mincut_pool_dense(g: &Graph, x: &Matrix, s: &Matrix) -> Result<PoolOutput> {
    let mut tape = Tape::new();
    let a = tape.constant(g.adjacency().clone());
    let d = tape.constant(Matrix::diag(&g.degrees()));
    let (xv, sv) = (tape.constant(x.clone()), tape.constant(s.clone()));
    let p = mincut_pool(&mut tape, a, d, xv, sv)?;
    Ok(PoolOutput {
        a_pooled: tape.value(p.a_pooled).clone(),
        x_pooled: tape.value(p.x_pooled).clone(),
        cut: tape.scalar(p.loss.cut),
        orthogonality: tape.scalar(p.loss.orthogonality),
    })
}
