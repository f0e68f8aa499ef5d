use crate::error::{Error, Result};
use crate::ops::OpGradients;
use crate::tensor::Tensor;

fn dims(x: &Tensor, weights: &Tensor) -> Result<(usize, usize, usize)> {
    match (x.shape(), weights.shape()) {
        (&[b, n], &[n2, u]) if n == n2 => Ok((b, n, u)),
        (xs, ws) => Err(Error::shape(format!(
            "dense: input {xs:?} does not fit weights {ws:?}"
        ))),
    }
}

/// `y = x W + b` for `x: [B, N]`, `W: [N, U]`, `b: [U]`.
pub fn dense_forward(x: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (batch, _, units) = dims(x, weights)?;
    if bias.shape() != [units] {
        return Err(Error::shape(format!(
            "dense bias has shape {:?}, expected [{units}]",
            bias.shape()
        )));
    }
    let mut y = Tensor::zeros(&[batch, units])?;
    let w = weights.data();
    for (x_row, y_row) in x
        .data()
        .chunks_exact(x.shape()[1])
        .zip(y.data_mut().chunks_exact_mut(units))
    {
        y_row.copy_from_slice(bias.data());
        for (&xv, w_row) in x_row.iter().zip(w.chunks_exact(units)) {
            if xv == 0.0 {
                continue;
            }
            for (acc, &wv) in y_row.iter_mut().zip(w_row) {
                *acc += xv * wv;
            }
        }
    }
    Ok(y)
}

pub fn dense_backward(x: &Tensor, weights: &Tensor, d_out: &Tensor) -> Result<OpGradients> {
    let (batch, inputs, units) = dims(x, weights)?;
    if d_out.shape() != [batch, units] {
        return Err(Error::shape(format!(
            "dense d_out has shape {:?}, expected [{batch}, {units}]",
            d_out.shape()
        )));
    }
    let mut d_input = Tensor::zeros(&[batch, inputs])?;
    let mut d_weights = Tensor::zeros(&[inputs, units])?;
    let mut d_bias = Tensor::zeros(&[units])?;
    let w = weights.data();
    for ((x_row, dy), dx_row) in x
        .data()
        .chunks_exact(inputs)
        .zip(d_out.data().chunks_exact(units))
        .zip(d_input.data_mut().chunks_exact_mut(inputs))
    {
        for (acc, &g) in d_bias.data_mut().iter_mut().zip(dy) {
            *acc += g;
        }
        for (((&xv, dx), w_row), dw_row) in x_row
            .iter()
            .zip(dx_row.iter_mut())
            .zip(w.chunks_exact(units))
            .zip(d_weights.data_mut().chunks_exact_mut(units))
        {
            *dx = w_row.iter().zip(dy).map(|(a, b)| a * b).sum();
            if xv != 0.0 {
                for (acc, &g) in dw_row.iter_mut().zip(dy) {
                    *acc += xv * g;
                }
            }
        }
    }
    Ok(OpGradients {
        d_input,
        d_weights: Some(d_weights),
        d_bias: Some(d_bias),
    })
}
