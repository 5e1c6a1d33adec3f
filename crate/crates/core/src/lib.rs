//! Simultaneous iris and periocular region detection.
//!
//! A YOLOv2-style single-shot detector (no route layers) built from scratch
//! on CPU kernels that are generic over the floating-point type, together
//! with the evaluation protocol used to compare a two-class detector
//! against two single-class detectors: IoU, F-score, mAP and a paired
//! Wilcoxon signed-rank test.

pub mod config;
pub mod data;
pub mod detfile;
pub mod error;
pub mod experiment;
pub mod head;
pub mod metrics;
pub mod network;
pub mod ops;
pub mod scalar;
pub mod stats;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::{Shape, TensorT};

/// Production tensors.
pub type Tensor = TensorT<f32>;
/// Double-precision tensors for gradient verification.
pub type Tensor64 = TensorT<f64>;
/// Production detector.
pub type Model = network::ModelT<f32>;
/// Double-precision detector for gradient verification.
pub type Model64 = network::ModelT<f64>;
