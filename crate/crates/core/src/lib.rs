//! Commute-time and spectral-gap graph rewiring.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: dense matrices, Jacobi eigensolver, Laplacian pseudo-inverse
//! - [`graph`]: the [`Graph`] value type, Laplacians and synthetic generators
//! - [`spectral`]: commute-time embeddings, effective resistances, Cheeger
//!   constants and the resistance/spectral-gap bound diagnostics
//! - [`autodiff`]: a small reverse-mode tape, MLPs and the Adam optimizer
//! - [`rewiring`]: the learned commute-time layer and the spectral-gap layer
//! - [`sparsify`]: effective-resistance spectral sparsification
//! - [`curvature`]: resistance curvature of nodes and edges
//! - [`gnn`]: message-passing graph classifiers that use the rewiring layers
//! - [`io`]: edge-list and dataset loaders, checkpoints and JSON reports

pub mod autodiff;
pub mod curvature;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod rewiring;
pub mod sparsify;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::Graph;
pub use linalg::Matrix;
