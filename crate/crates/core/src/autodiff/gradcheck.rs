use super::params::{ParamId, ParameterSet};
use super::tape::{Tape, Var};
use crate::error::Result;

/// Central-difference step used when callers have no reason to pick another.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Compares tape gradients with central differences entry by entry.
///
/// `f` builds the scalar loss on a fresh tape from the parameter nodes it is
/// handed (one per parameter, in id order). Returns the largest relative
/// error `|a − n| / max(1e-8, |a| + |n|)`.
pub fn grad_check<F>(params: &ParameterSet, h: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    grad_check_params(params, h, |tape, ps| {
        let vars: Vec<Var> = ps.ids().map(|id| tape.param(ps, id)).collect();
        f(tape, &vars)
    })
}

/// Like [`grad_check`], but `f` receives the (possibly perturbed) parameter
/// set and records parameters itself, e.g. through a layer's `forward`.
pub fn grad_check_params<F>(params: &ParameterSet, h: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Tape, &ParameterSet) -> Result<Var>,
{
    let eval = |ps: &ParameterSet| -> Result<(Tape, Var)> {
        let mut tape = Tape::new();
        let loss = f(&mut tape, ps)?;
        Ok((tape, loss))
    };

    let (tape, loss) = eval(params)?;
    let analytic = tape.backward(loss)?.for_params(params);

    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    for id in params.ids() {
        for k in 0..params.value(id).data().len() {
            let numeric = central_difference(&mut probe, id, k, h, |ps| {
                let (t, l) = eval(ps)?;
                Ok(t.scalar(l))
            })?;
            let a = analytic[id.index()].data()[k];
            let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

fn central_difference(
    probe: &mut ParameterSet,
    id: ParamId,
    k: usize,
    h: f64,
    f: impl Fn(&ParameterSet) -> Result<f64>,
) -> Result<f64> {
    let x0 = probe.value(id).data()[k];
    probe.value_mut(id).data_mut()[k] = x0 + h;
    let up = f(probe)?;
    probe.value_mut(id).data_mut()[k] = x0 - h;
    let down = f(probe)?;
    probe.value_mut(id).data_mut()[k] = x0;
    Ok((up - down) / (2.0 * h))
}
