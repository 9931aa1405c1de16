//! Learned rewiring layers: the commute-time layer and the spectral-gap
//! layer, plus the closed-form gradients the latter is built on.

mod ct;
mod cut;
mod features;
mod gap;
mod gradients;

pub use ct::{
    ct_layer_forward, ct_loss, ct_loss_vars, train_ct_embedder, CTLayerOutput, CtLayer, CtLayerConfig, CtLayerVars,
    CtLoss, CtLossVars, CtTrainConfig, TrainedCt,
};
pub use cut::{cut_loss, CutLossVars};
pub use features::{inject_degree_features, input_dim, node_inputs, FeatureConfig};
pub use gap::{
    gap_layer_forward, train_gap_layer, GapConfig, GapLayer, GapLayerOutput, GapLayerVars, GapMode, GapTrainConfig,
    TrainedGap,
};
pub use gradients::{
    fd_gap_gradient, fiedler_approx, grad_ncut, grad_rcut, grad_rcut_entries, pair_sensitivity, MIN_SIMPLE_GAP,
};
