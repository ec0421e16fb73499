//! The pair-eye classifier: layer specs, forward/backward passes, SGD
//! training and weight files.
//!
//! Arithmetic is generic over the float type so that 32-bit training can be
//! checked against a 64-bit shadow.

mod io;
mod layers;
mod network;
mod simd;
mod spec;
mod tensor;
mod train;

use std::fmt::Debug;

use num_traits::{Float, NumAssignOps};
use thiserror::Error;

pub use io::{load_weights, save_weights, MAGIC};
pub use network::{
    argmax, backward, draw_masks, forward, forward_with_masks, predict, predict_batch, sgd_step, ForwardCache, Gradients,
    LayerParams, Masks, Mode, NetworkState, Trace,
};
pub use spec::{param_count, reference_spec, LayerSpec, NetworkSpec, Shape, DEFAULT_DROPOUT, PAIR_INPUT};
pub use tensor::Tensor;
pub use train::{accuracy, train, TrainConfig, TrainReport};

/// Float types the network runs on.
pub trait Real: Float + NumAssignOps + Send + Sync + Debug + Default + 'static {
    /// Dot product over the common length, in a fixed summation order.
    fn dot(a: &[Self], b: &[Self]) -> Self;
    /// `y += a·x` over the common length.
    fn axpy(y: &mut [Self], a: Self, x: &[Self]);
}

impl Real for f32 {
    fn dot(a: &[f32], b: &[f32]) -> f32 {
        simd::dot_f32(a, b)
    }

    fn axpy(y: &mut [f32], a: f32, x: &[f32]) {
        simd::axpy_f32(y, a, x)
    }
}

impl Real for f64 {
    fn dot(a: &[f64], b: &[f64]) -> f64 {
        simd::dot_portable(a, b)
    }

    fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
        simd::axpy_portable(y, a, x)
    }
}

#[derive(Debug, Error)]
pub enum CnnError {
    #[error("invalid network spec: {0}")]
    Spec(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("training diverged at iteration {iteration}: loss {loss} (learning rate {lr}); lower the learning rate")]
    Diverged { iteration: usize, loss: f64, lr: f64 },
    #[error("{0}")]
    Argument(String),
    #[error("not a weight file (bad magic)")]
    BadMagic,
    #[error("weight file checksum mismatch: stored {stored:#010x}, computed {actual:#010x}")]
    Checksum { stored: u32, actual: u32 },
    #[error("weight file does not match the network: {0}")]
    ShapeMismatch(String),
    #[error("weight file is truncated")]
    Truncated,
}
