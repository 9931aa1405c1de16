//! Graph classifiers built from a linear encoder, an optional rewiring
//! layer, two convolutions around MinCut pooling and a mean readout.

mod experiment;
mod layers;
mod model;
mod train;

pub use experiment::{experiment_synthetic, synthetic_dataset, Dataset, ExperimentConfig, ExperimentRow, ExperimentTable};
pub use layers::{
    ensure_support, gcn_conv, gcn_conv_dense, gcn_normalized_adjacency, mincut_pool, mincut_pool_dense, sym_normalize,
    Activation, PoolOutput, PoolVars,
};
pub use model::{build_model, Model, ModelKind, ModelSpec, ModelVars};
pub use train::{evaluate, examples, stratified_split, train, train_on_dataset, Evaluation, Example, Metrics, TrainConfig};
