//! Reverse-mode differentiation over dense matrices, the perceptron used by
//! the rewiring layers, and the Adam optimizer.

mod fit;
mod gradcheck;
mod mlp;
mod params;
mod tape;

pub use fit::{fit, loss_and_grads, FitConfig};
pub use gradcheck::{grad_check, grad_check_params, DEFAULT_FD_STEP};
pub use mlp::{mlp_forward, MLPConfig, Mlp, OutputActivation};
pub use params::{AdamConfig, ParamId, Parameter, ParameterSet};
pub use tape::{Gradients, Tape, Var};
