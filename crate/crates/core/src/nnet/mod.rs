//! Minimal dense-tensor kernels for the tiny-YOLO forward pass on CPU.
//!
//! All kernels are pure functions over immutable inputs and are safe to call
//! from multiple threads on disjoint tensors. Convolution goes through
//! im2col + a single sgemm; correctness is pinned against a naive loop
//! oracle in the test suites.

mod ops;
mod tensor;

pub use ops::{
    Activation, BatchNorm, ConvParams, PoolParams, conv2d, fold_batchnorm, leaky_relu, maxpool2d,
};
pub use tensor::Tensor;

use thiserror::Error;

/// Leaky ReLU negative slope. The cfg file does not carry it; this is the
/// Darknet convention.
pub const LEAKY_SLOPE: f32 = 0.1;

/// Batch-norm epsilon used when folding normalization into conv weights.
pub const BATCHNORM_EPSILON: f32 = 1e-6;

#[derive(Debug, Error)]
pub enum NnetError {
    #[error("tensor data length {actual} does not match shape {shape:?} ({expected} values)")]
    DataLength {
        shape: [usize; 4],
        expected: usize,
        actual: usize,
    },
    #[error("tensor shape {0:?} has a zero dimension")]
    ZeroDim([usize; 4]),
    #[error("input has {actual} channels, convolution weights expect {expected}")]
    ChannelMismatch { expected: usize, actual: usize },
    #[error("{kind} length {actual} does not match expected {expected}")]
    ParamLength {
        kind: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("kernel {kernel} exceeds padded input extent {padded}")]
    KernelTooLarge { kernel: usize, padded: usize },
    #[error("negative batch-norm variance {value} at channel {channel}")]
    NegativeVariance { channel: usize, value: f32 },
    #[error("convolution parameters carry no batch norm to fold")]
    MissingBatchNorm,
    #[error("{field} must be positive")]
    NonPositive { field: &'static str },
}
