//! Layer kernels: convolution, batch normalization, leaky ReLU, max-pooling.
//!
//! All kernels are pure functions of their inputs (batch norm in training
//! mode additionally updates the running statistics it is handed).

mod activation;
mod batchnorm;
mod conv;
mod pool;

pub use activation::{leaky_relu, leaky_relu_backward, LEAKY_SLOPE};
pub use batchnorm::{
    batchnorm_apply, batchnorm_backward, batchnorm_inference, batchnorm_train, BatchNormCache,
    BatchNormGrads, BatchNormParams, DEFAULT_EPSILON, DEFAULT_MOMENTUM,
};
pub use conv::{conv2d_backward, conv2d_backward_with, conv2d_forward, ConvGrads, ConvParams};
pub use pool::{maxpool2, maxpool2_backward};
