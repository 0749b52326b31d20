//! Multi-view subspace clustering via tensor low-rank representation
//! learning: a t-product tensor-algebra kernel, an augmented-Lagrangian
//! solver for the shared low-rank representation, spectral clustering on the
//! learned intrinsic affinity, and dataset/evaluation utilities.

pub mod dataset;
pub mod metrics;
pub mod prox;
pub mod solver;
pub mod spectral;
pub mod tensor;
