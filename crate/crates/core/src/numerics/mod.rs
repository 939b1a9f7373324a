//! Dense and sparse linear algebra, activations, dropout, Adam and the
//! finite-difference gradient harness.

pub mod adam;
pub mod gradcheck;
pub mod matrix;
pub mod ops;
pub mod sparse;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use gradcheck::{finite_difference_check, GradCheckOptions, GradCheckReport};
pub use matrix::{argmax, Matrix};
pub use ops::{activation, dropout_mask, log_softmax_rows, row_softmax, Activation};
pub use sparse::{build_normalized_adjacency, SparseAdjacency};
