//! Multivariate time-series classification with dilated convolutions.
//!
//! A multichannel series is cut into fixed-length windows; each window becomes
//! a one-channel image with one row per variate. A stack of dilated (DL) and
//! row-wise strided (SL) convolutions with ReLU, followed by fully connected
//! layers and a softmax, classifies the image. Training uses Adam on mean
//! cross-entropy plus an L2 penalty on weights.
//!
//! Everything runs on the CPU in `f64` with hand-written forward and
//! reverse-mode kernels.

pub mod cli;
pub mod data;
pub mod error;
pub mod manifest;
pub mod metrics;
pub mod model;
pub mod ops;
pub mod optim;
pub mod report;
pub mod synthetic;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Shape4, Tensor};
