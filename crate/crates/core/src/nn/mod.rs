//! Small reverse-mode autodiff stack: matrices, tape, layers, Adam, checkpoints.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod tape;
pub mod tensor;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT};
pub use layers::{glorot_limit, uniform_init, Adam, Dense, GcnLayer, ParamSet};
pub use tape::{softmax_in_place, Activation, Tape, Var};
pub use tensor::{normalized_adjacency, normalized_adjacency_dense, Mat, SparseMat};
