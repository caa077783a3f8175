//! Position-aware graph neural networks.
//!
//! The crate is split along the data flow of a training run:
//!
//! - [`graph`]: synthetic generators, edge-list loading, feature preparation
//!   and train/validation/test pair splits.
//! - [`metric`]: shortest-path distances, q-hop truncation, anchor-set
//!   sampling, the classical anchor embedding and distortion measurement.
//! - [`tensor`]: dense matrices, a matrix-level reverse-mode tape and Adam.
//! - [`model`]: the anchor-set message-passing network and a GCN-style
//!   mean-aggregation baseline.
//! - [`train`]: objectives, the optimisation loop with validation-based model
//!   selection, and exact ROC AUC.
//! - [`cli`]: the `pgnn` command-line front end.
//!
//! Data-parallel loops (per-source BFS, matrix rows, independent repeats) run
//! on rayon when the `parallel` feature is enabled and sequentially otherwise.
//! Results are merged in index order either way, so outputs do not depend on
//! the feature.

pub mod cli;
mod error;
pub mod graph;
pub mod metric;
pub mod model;
mod par;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use graph::{EdgeSplit, Graph, PairTask};
pub use metric::{AnchorFamily, Distance, DistanceMatrix};
pub use model::{PgnnConfig, PgnnParams};
pub use tensor::{Matrix, Tape, Var};
pub use train::{Metrics, TrainConfig};
