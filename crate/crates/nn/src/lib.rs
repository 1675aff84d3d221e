//! Reverse-mode differentiation for static feed-forward convolutional
//! graphs on `(batch, channel, height, width)` tensors.
//!
//! Training runs in `f32`; the same graphs instantiated with `f64` serve the
//! finite-difference gradient checks.

pub mod gradcheck;
pub mod graph;
pub mod ops;
pub mod optim;
pub mod real;
pub mod tensor;
pub mod weights;

pub use gradcheck::{grad_check, GradCheckOptions, GradReport};
pub use graph::{Architecture, Layer, LayerSpec, ModelGraph, Param, Tape};
pub use ops::{PadMode, Padding};
pub use optim::{Adam, ReduceOnPlateau};
pub use real::Real;
pub use tensor::Tensor;
pub use weights::{load_checkpoint, load_nnwt, save_checkpoint, to_nnwt};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("pooling needs even dimensions, got {height}×{width}")]
    OddDims { height: usize, width: usize },
    #[error("no layer output named `{0}`")]
    UnknownName(String),
    #[error("bad weights file: {0}")]
    BadWeights(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
