//! Append-only tape of dense-matrix operations with reverse-mode adjoints.
//!
//! Every value on the tape is a [`Matrix`]; scalars are 1×1 matrices.
//! Nodes only ever reference earlier nodes, so the tape is topologically
//! ordered by construction and the backward pass is a single reverse scan.

use super::params::{ParamId, ParameterSet};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Clamp applied to Euclidean distances in the `cdist` adjoint.
const CDIST_MIN_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    Tanh(Var),
    Relu(Var),
    Softplus(Var),
    RowSoftmax(Var),
    Trace(Var),
    FrobeniusNorm(Var),
    /// matrix / scalar node
    ScalarDiv(Var, Var),
    /// matrix · scalar node
    ScalarMul(Var, Var),
    CdistSq(Var),
    Cdist(Var),
    Transpose(Var),
    Scale(Var, f64),
    AddConst(Var),
    Powf(Var, f64),
    AddRow(Var, Var),
    Sum(Var),
    CrossEntropy(Var, Vec<usize>),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Hadamard(..) => "hadamard",
            Op::Tanh(_) => "tanh",
            Op::Relu(_) => "relu",
            Op::Softplus(_) => "softplus",
            Op::RowSoftmax(_) => "row_softmax",
            Op::Trace(_) => "trace",
            Op::FrobeniusNorm(_) => "frobenius_norm",
            Op::ScalarDiv(..) => "scalar_div",
            Op::ScalarMul(..) => "scalar_mul",
            Op::CdistSq(_) => "cdist_sq",
            Op::Cdist(_) => "cdist",
            Op::Transpose(_) => "transpose",
            Op::Scale(..) => "scale",
            Op::AddConst(_) => "add_const",
            Op::Powf(..) => "powf",
            Op::AddRow(..) => "add_row",
            Op::Sum(_) => "sum",
            Op::CrossEntropy(..) => "cross_entropy",
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

/// Reverse-mode differentiation tape. Single-threaded; build one per
/// forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints of every node reached from a scalar loss.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    params: Vec<(ParamId, usize)>,
}

impl Gradients {
    /// Adjoint of `v`, or `None` if the loss does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// One gradient per parameter of `params`; parameters the loss never
    /// touched get zeros.
    pub fn for_params(&self, params: &ParameterSet) -> Vec<Matrix> {
        let mut out: Vec<Matrix> = params
            .iter()
            .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
            .collect();
        for &(id, node) in &self.params {
            if let Some(g) = &self.grads[node] {
                out[id.index()].add_assign_scaled(g, 1.0);
            }
        }
        out
    }
}

fn scalar_of(m: &Matrix) -> f64 {
    m.data()[0]
}

fn row_softmax(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for i in 0..x.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for a in row.iter_mut() {
            *a = (*a - max).exp();
            total += *a;
        }
        for a in row.iter_mut() {
            *a /= total;
        }
    }
    out
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        scalar_of(&self.nodes[v.0].value)
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) == self.shape(b) {
            Ok(())
        } else {
            Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ))
        }
    }

    fn require_scalar(&self, op: &'static str, s: Var) -> Result<()> {
        if self.shape(s) == (1, 1) {
            Ok(())
        } else {
            Err(Error::shape(
                op,
                format!("expected a 1x1 scalar operand, got {:?}", self.shape(s)),
            ))
        }
    }

    fn require_square(&self, op: &'static str, a: Var) -> Result<()> {
        let (r, c) = self.shape(a);
        if r == c {
            Ok(())
        } else {
            Err(Error::shape(op, format!("expected a square matrix, got {r}x{c}")))
        }
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Constant)
    }

    pub fn scalar_constant(&mut self, value: f64) -> Var {
        self.constant(Matrix::filled(1, 1, value))
    }

    /// Records a trainable parameter; its adjoint is reported by
    /// [`Gradients::for_params`].
    pub fn param(&mut self, params: &ParameterSet, id: ParamId) -> Var {
        self.push(params.value(id).clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(Error::shape("matmul", format!("{sa:?} x {sb:?}")));
        }
        let value = self.value(a).matmul(self.value(b));
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = self.value(a).add(self.value(b));
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a).sub(self.value(b));
        Ok(self.push(value, Op::Sub(a, b)))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("hadamard", a, b)?;
        let value = self.value(a).hadamard(self.value(b));
        Ok(self.push(value, Op::Hadamard(a, b)))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let value = self.value(a).map(softplus);
        self.push(value, Op::Softplus(a))
    }

    pub fn row_softmax(&mut self, a: Var) -> Var {
        let value = row_softmax(self.value(a));
        self.push(value, Op::RowSoftmax(a))
    }

    pub fn trace(&mut self, a: Var) -> Result<Var> {
        self.require_square("trace", a)?;
        let value = Matrix::filled(1, 1, self.value(a).trace());
        Ok(self.push(value, Op::Trace(a)))
    }

    pub fn frobenius_norm(&mut self, a: Var) -> Var {
        let value = Matrix::filled(1, 1, self.value(a).frobenius_norm());
        self.push(value, Op::FrobeniusNorm(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::filled(1, 1, self.value(a).sum());
        self.push(value, Op::Sum(a))
    }

    /// `a / s` for a scalar node `s`.
    pub fn scalar_div(&mut self, a: Var, s: Var) -> Result<Var> {
        self.require_scalar("scalar_div", s)?;
        let value = self.value(a).scale(1.0 / self.scalar(s));
        Ok(self.push(value, Op::ScalarDiv(a, s)))
    }

    /// `a · s` for a scalar node `s`.
    pub fn scalar_mul(&mut self, a: Var, s: Var) -> Result<Var> {
        self.require_scalar("scalar_mul", s)?;
        let value = self.value(a).scale(self.scalar(s));
        Ok(self.push(value, Op::ScalarMul(a, s)))
    }

    /// Squared pairwise distances between the rows of `z`.
    pub fn cdist_sq(&mut self, z: Var) -> Var {
        let value = crate::linalg::cdist(self.value(z), true);
        self.push(value, Op::CdistSq(z))
    }

    /// Euclidean pairwise distances between the rows of `z`.
    pub fn cdist(&mut self, z: Var) -> Var {
        let value = crate::linalg::cdist(self.value(z), false);
        self.push(value, Op::Cdist(z))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(value, Op::Transpose(a))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).scale(s);
        self.push(value, Op::Scale(a, s))
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| x + c);
        self.push(value, Op::AddConst(a))
    }

    /// Elementwise `a^p`. Callers keep the base positive for non-integer `p`.
    pub fn powf(&mut self, a: Var, p: f64) -> Var {
        let value = self.value(a).map(|x| x.powf(p));
        self.push(value, Op::Powf(a, p))
    }

    /// Adds the 1×c row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sb != (1, sa.1) {
            return Err(Error::shape("add_row", format!("{sa:?} + row {sb:?}")));
        }
        let mut value = self.value(a).clone();
        let row = self.value(b).row(0).to_vec();
        for i in 0..sa.0 {
            for (x, r) in value.row_mut(i).iter_mut().zip(&row) {
                *x += r;
            }
        }
        Ok(self.push(value, Op::AddRow(a, b)))
    }

    /// Mean softmax cross-entropy of each logits row against its target class.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let (r, c) = self.shape(logits);
        if targets.len() != r || targets.iter().any(|&t| t >= c) {
            return Err(Error::shape(
                "cross_entropy",
                format!("{r}x{c} logits vs targets {targets:?}"),
            ));
        }
        let probs = row_softmax(self.value(logits));
        let loss = targets
            .iter()
            .enumerate()
            .map(|(i, &t)| -probs[(i, t)].max(f64::MIN_POSITIVE).ln())
            .sum::<f64>()
            / r as f64;
        Ok(self.push(
            Matrix::filled(1, 1, loss),
            Op::CrossEntropy(logits, targets.to_vec()),
        ))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::shape(
                "backward",
                format!("loss must be a 1x1 scalar, got {:?}", self.shape(loss)),
            ));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));

        fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
            match &mut grads[v.0] {
                Some(acc) => acc.add_assign_scaled(&g, 1.0),
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let y = &node.value;
            match &node.op {
                Op::Constant | Op::Param(_) => {}
                Op::MatMul(a, b) => {
                    let ga = g.matmul(&self.value(*b).transpose());
                    let gb = self.value(*a).transpose().matmul(&g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.scale(-1.0));
                }
                Op::Hadamard(a, b) => {
                    let ga = g.hadamard(self.value(*b));
                    let gb = g.hadamard(self.value(*a));
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Tanh(a) => {
                    accumulate(&mut grads, *a, g.zip_map(y, |g, y| g * (1.0 - y * y)));
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    accumulate(&mut grads, *a, g.zip_map(x, |g, x| if x > 0.0 { g } else { 0.0 }));
                }
                Op::Softplus(a) => {
                    let x = self.value(*a);
                    accumulate(&mut grads, *a, g.zip_map(x, |g, x| g * sigmoid(x)));
                }
                Op::RowSoftmax(a) => {
                    let mut ga = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let inner: f64 = g.row(r).iter().zip(y.row(r)).map(|(g, y)| g * y).sum();
                        for c in 0..y.cols() {
                            ga[(r, c)] = y[(r, c)] * (g[(r, c)] - inner);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Trace(a) => {
                    let n = self.shape(*a).0;
                    accumulate(&mut grads, *a, Matrix::identity(n).scale(scalar_of(&g)));
                }
                Op::FrobeniusNorm(a) => {
                    let norm = scalar_of(y);
                    let x = self.value(*a);
                    let ga = if norm > 0.0 {
                        x.scale(scalar_of(&g) / norm)
                    } else {
                        Matrix::zeros(x.rows(), x.cols())
                    };
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sum(a) => {
                    let (r, c) = self.shape(*a);
                    accumulate(&mut grads, *a, Matrix::filled(r, c, scalar_of(&g)));
                }
                Op::ScalarDiv(a, s) => {
                    let sv = self.scalar(*s);
                    let x = self.value(*a);
                    let gs = -g.hadamard(x).sum() / (sv * sv);
                    accumulate(&mut grads, *a, g.scale(1.0 / sv));
                    accumulate(&mut grads, *s, Matrix::filled(1, 1, gs));
                }
                Op::ScalarMul(a, s) => {
                    let sv = self.scalar(*s);
                    let x = self.value(*a);
                    let gs = g.hadamard(x).sum();
                    accumulate(&mut grads, *a, g.scale(sv));
                    accumulate(&mut grads, *s, Matrix::filled(1, 1, gs));
                }
                Op::CdistSq(z) | Op::Cdist(z) => {
                    let squared = matches!(node.op, Op::CdistSq(_));
                    let zv = self.value(*z);
                    let (n, k) = zv.shape();
                    let mut gz = Matrix::zeros(n, k);
                    for u in 0..n {
                        for v in 0..n {
                            if u == v {
                                continue;
                            }
                            let w = g[(u, v)] + g[(v, u)];
                            if w == 0.0 {
                                continue;
                            }
                            let coef = if squared {
                                2.0 * w
                            } else {
                                let d = y[(u, v)];
                                if d == 0.0 {
                                    continue;
                                }
                                w / d.max(CDIST_MIN_DISTANCE)
                            };
                            for c in 0..k {
                                gz[(u, c)] += coef * (zv[(u, c)] - zv[(v, c)]);
                            }
                        }
                    }
                    accumulate(&mut grads, *z, gz);
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, g.transpose()),
                Op::Scale(a, s) => accumulate(&mut grads, *a, g.scale(*s)),
                Op::AddConst(a) => accumulate(&mut grads, *a, g.clone()),
                Op::Powf(a, p) => {
                    let x = self.value(*a);
                    accumulate(&mut grads, *a, g.zip_map(x, |g, x| g * p * x.powf(p - 1.0)));
                }
                Op::AddRow(a, b) => {
                    let mut gb = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (acc, x) in gb.row_mut(0).iter_mut().zip(g.row(r)) {
                            *acc += x;
                        }
                    }
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, gb);
                }
                Op::CrossEntropy(logits, targets) => {
                    let scale = scalar_of(&g) / targets.len() as f64;
                    let mut gl = row_softmax(self.value(*logits));
                    for (r, &t) in targets.iter().enumerate() {
                        gl[(r, t)] -= 1.0;
                    }
                    accumulate(&mut grads, *logits, gl.scale(scale));
                }
            }
            grads[i] = Some(g);
        }

        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.op {
                Op::Param(id) => Some((id, i)),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads, params })
    }

    /// Name of the op that produced `v` (diagnostics).
    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes[v.0].op.name()
    }
}
