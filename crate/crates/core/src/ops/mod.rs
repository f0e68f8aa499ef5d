//! Forward and reverse-mode kernels for the network's layers.

mod conv;
mod dense;
mod loss;

pub use conv::{conv2d_backward, conv2d_forward, ConvParams, Padding};
pub(crate) use conv::conv2d_backward_impl;
pub use dense::{dense_backward, dense_forward};
pub use loss::{l2_penalty, softmax_xent_backward, softmax_xent_forward};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Gradients of one op with respect to its input and, when it has them,
/// its weights and bias.
#[derive(Clone, Debug)]
pub struct OpGradients {
    pub d_input: Tensor,
    pub d_weights: Option<Tensor>,
    pub d_bias: Option<Tensor>,
}

pub fn relu_forward(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Passes `d_out` where `x > 0`; the subgradient at exactly zero is 0.
pub fn relu_backward(x: &Tensor, d_out: &Tensor) -> Result<Tensor> {
    if x.shape() != d_out.shape() {
        return Err(Error::shape(format!(
            "relu backward: x {:?} vs d_out {:?}",
            x.shape(),
            d_out.shape()
        )));
    }
    let data = x
        .data()
        .iter()
        .zip(d_out.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_vec(x.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_values() {
        let x = Tensor::from_vec(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu_forward(&x).data(), &[0.0, 0.0, 2.0]);
        let g = Tensor::new(&[3], 5.0).unwrap();
        assert_eq!(relu_backward(&x, &g).unwrap().data(), &[0.0, 0.0, 5.0]);
    }

    #[test]
    fn relu_is_identity_on_positive_inputs() {
        let x = Tensor::from_vec(&[2, 2], vec![0.5, 1.0, 3.0, 1e-9]).unwrap();
        assert_eq!(relu_forward(&x), x);
        let g = Tensor::from_vec(&[2, 2], vec![1.0, -2.0, 3.0, -4.0]).unwrap();
        assert_eq!(relu_backward(&x, &g).unwrap(), g);
    }
}
