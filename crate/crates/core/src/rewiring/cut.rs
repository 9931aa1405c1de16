use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// The two terms of the relaxed min-cut objective for a soft assignment `S`
/// (n×k): `−Tr[SᵀAS]/Tr[SᵀDS]` and `‖SᵀS/‖SᵀS‖_F − I_k/√k‖_F`.
#[derive(Debug, Clone, Copy)]
pub struct CutLossVars {
    pub cut: Var,
    pub orthogonality: Var,
    pub total: Var,
}

/// Builds both cut-loss terms on `tape`. `a` and `d` are n×n constants.
pub fn cut_loss(tape: &mut Tape, s: Var, a: Var, d: Var) -> Result<CutLossVars> {
    let k = tape.value(s).cols();
    let st = tape.transpose(s);
    let as_ = tape.matmul(a, s)?;
    let num = tape.matmul(st, as_)?;
    let num = tape.trace(num)?;
    let ds = tape.matmul(d, s)?;
    let den = tape.matmul(st, ds)?;
    let den = tape.trace(den)?;
    if tape.scalar(den) <= 1e-12 {
        return Err(Error::domain("cut loss: Tr[S^T D S] vanishes"));
    }
    let ratio = tape.scalar_div(num, den)?;
    let cut = tape.scale(ratio, -1.0);

    let gram = tape.matmul(st, s)?;
    let gram_norm = tape.frobenius_norm(gram);
    let gram_norm = tape.add_const(gram_norm, 1e-12);
    let normalized = tape.scalar_div(gram, gram_norm)?;
    let target = tape.constant(Matrix::identity(k).scale(1.0 / (k as f64).sqrt()));
    let diff = tape.sub(normalized, target)?;
    let orthogonality = tape.frobenius_norm(diff);
    let total = tape.add(cut, orthogonality)?;
    Ok(CutLossVars {
        cut,
        orthogonality,
        total,
    })
}
