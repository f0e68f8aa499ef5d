//! 2-D convolution with per-axis dilation, stride and padding.
//!
//! Both passes lower each batch item to a column matrix (`im2col`) whose rows
//! are the kernel taps in `(channel, row, col)` order. The forward product
//! accumulates taps in that order starting from the bias, which is the same
//! summation order as a direct seven-loop convolution over the padded input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::OpGradients;
use crate::tensor::{Shape4, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// Zero padding on both axes so each output extent is `ceil(n / stride)`.
    Same,
    /// Same padding along rows, none along columns.
    SameRowsValidCols,
    Valid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvParams {
    pub filter_rows: usize,
    pub filter_cols: usize,
    pub out_channels: usize,
    pub dilation_rows: usize,
    pub dilation_cols: usize,
    pub stride_rows: usize,
    pub stride_cols: usize,
    pub padding: Padding,
}

impl ConvParams {
    /// A dilated layer: unit stride, same padding on both axes.
    pub fn dilated(filter: (usize, usize), filters: usize, dilation: (usize, usize)) -> Self {
        Self {
            filter_rows: filter.0,
            filter_cols: filter.1,
            out_channels: filters,
            dilation_rows: dilation.0,
            dilation_cols: dilation.1,
            stride_rows: 1,
            stride_cols: 1,
            padding: Padding::Same,
        }
    }

    /// A row-wise strided layer: one-row filter, no dilation, valid padding.
    pub fn strided(filter_cols: usize, filters: usize, stride_cols: usize) -> Self {
        Self {
            filter_rows: 1,
            filter_cols,
            out_channels: filters,
            dilation_rows: 1,
            dilation_cols: 1,
            stride_rows: 1,
            stride_cols,
            padding: Padding::Valid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("filter_rows", self.filter_rows),
            ("filter_cols", self.filter_cols),
            ("out_channels", self.out_channels),
            ("dilation_rows", self.dilation_rows),
            ("dilation_cols", self.dilation_cols),
            ("stride_rows", self.stride_rows),
            ("stride_cols", self.stride_cols),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::config(format!("conv {name} must be at least 1")));
            }
        }
        Ok(())
    }

    pub fn is_dilated_layer(&self) -> bool {
        self.stride_rows == 1 && self.stride_cols == 1
    }

    pub fn is_strided_layer(&self) -> bool {
        self.filter_rows == 1 && self.dilation_rows == 1 && self.dilation_cols == 1
    }

    pub fn effective_rows(&self) -> usize {
        (self.filter_rows - 1) * self.dilation_rows + 1
    }

    pub fn effective_cols(&self) -> usize {
        (self.filter_cols - 1) * self.dilation_cols + 1
    }

    fn pads_rows(&self) -> bool {
        matches!(self.padding, Padding::Same | Padding::SameRowsValidCols)
    }

    fn pads_cols(&self) -> bool {
        self.padding == Padding::Same
    }

    pub fn output_shape(&self, input: Shape4) -> Result<Shape4> {
        let g = Geometry::new(input, self)?;
        Ok(g.output)
    }
}

/// Output extent and leading padding along one axis.
fn axis_plan(n: usize, eff: usize, stride: usize, same: bool, axis: &str) -> Result<(usize, usize)> {
    if same {
        let out = n.div_ceil(stride);
        let total = ((out - 1) * stride + eff).saturating_sub(n);
        Ok((out, total / 2))
    } else {
        if eff > n {
            return Err(Error::shape(format!(
                "effective kernel extent {eff} exceeds input {axis} extent {n}"
            )));
        }
        Ok(((n - eff) / stride + 1, 0))
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Geometry {
    pub input: Shape4,
    pub output: Shape4,
    pub pad_top: usize,
    pub pad_left: usize,
    pub p: ConvParams,
}

impl Geometry {
    pub fn new(input: Shape4, p: &ConvParams) -> Result<Self> {
        p.validate()?;
        let (out_rows, pad_top) = axis_plan(
            input.rows,
            p.effective_rows(),
            p.stride_rows,
            p.pads_rows(),
            "row",
        )?;
        let (out_cols, pad_left) = axis_plan(
            input.cols,
            p.effective_cols(),
            p.stride_cols,
            p.pads_cols(),
            "column",
        )?;
        Ok(Self {
            input,
            output: Shape4 {
                batch: input.batch,
                channels: p.out_channels,
                rows: out_rows,
                cols: out_cols,
            },
            pad_top,
            pad_left,
            p: *p,
        })
    }

    fn taps(&self) -> usize {
        self.input.channels * self.p.filter_rows * self.p.filter_cols
    }

    fn positions(&self) -> usize {
        self.output.rows * self.output.cols
    }

    /// Calls `f(tap, position, input_offset)` for every in-bounds pairing.
    /// Pairings that land in the zero padding are skipped.
    #[inline]
    fn for_each_source(&self, mut f: impl FnMut(usize, usize, usize)) {
        let Geometry {
            input, output, p, ..
        } = *self;
        let mut tap = 0;
        for c in 0..input.channels {
            for i in 0..p.filter_rows {
                for j in 0..p.filter_cols {
                    for r in 0..output.rows {
                        let row = (r * p.stride_rows + i * p.dilation_rows) as isize
                            - self.pad_top as isize;
                        if row < 0 || row as usize >= input.rows {
                            continue;
                        }
                        let base = (c * input.rows + row as usize) * input.cols;
                        for w in 0..output.cols {
                            let col = (w * p.stride_cols + j * p.dilation_cols) as isize
                                - self.pad_left as isize;
                            if col < 0 || col as usize >= input.cols {
                                continue;
                            }
                            f(tap, r * output.cols + w, base + col as usize);
                        }
                    }
                    tap += 1;
                }
            }
        }
    }

    fn im2col(&self, item: &[f64], col: &mut [f64]) {
        col.fill(0.0);
        let positions = self.positions();
        self.for_each_source(|tap, pos, src| col[tap * positions + pos] = item[src]);
    }

    fn col2im(&self, col: &[f64], item: &mut [f64]) {
        let positions = self.positions();
        self.for_each_source(|tap, pos, dst| item[dst] += col[tap * positions + pos]);
    }
}

fn check_operands(input: &Tensor, weights: &Tensor, p: &ConvParams) -> Result<Geometry> {
    let in_shape = Shape4::of(input)?;
    let expected = [
        p.out_channels,
        in_shape.channels,
        p.filter_rows,
        p.filter_cols,
    ];
    if weights.shape() != expected {
        return Err(Error::shape(format!(
            "conv weights have shape {:?}, expected {expected:?}",
            weights.shape()
        )));
    }
    Geometry::new(in_shape, p)
}

pub fn conv2d_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    p: &ConvParams,
) -> Result<Tensor> {
    let g = check_operands(input, weights, p)?;
    if bias.shape() != [p.out_channels] {
        return Err(Error::shape(format!(
            "conv bias has shape {:?}, expected [{}]",
            bias.shape(),
            p.out_channels
        )));
    }
    let (taps, positions) = (g.taps(), g.positions());
    let in_len = g.input.item_len();
    let out_len = g.output.item_len();
    let mut out = Tensor::zeros(&g.output.dims())?;
    let mut col = vec![0.0; taps * positions];
    let w = weights.data();
    for (x, y) in input
        .data()
        .chunks_exact(in_len)
        .zip(out.data_mut().chunks_exact_mut(out_len))
    {
        g.im2col(x, &mut col);
        for (f, y_f) in y.chunks_exact_mut(positions).enumerate() {
            y_f.fill(bias.data()[f]);
            for (k, col_k) in col.chunks_exact(positions).enumerate() {
                let wk = w[f * taps + k];
                for (acc, &v) in y_f.iter_mut().zip(col_k) {
                    *acc += wk * v;
                }
            }
        }
    }
    Ok(out)
}

pub fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    p: &ConvParams,
    d_out: &Tensor,
) -> Result<OpGradients> {
    conv2d_backward_impl(input, weights, p, d_out, true)
}

/// Backward pass; `d_input` is left zero when `want_input_grad` is false
/// (the first layer of a network has no upstream to feed).
pub(crate) fn conv2d_backward_impl(
    input: &Tensor,
    weights: &Tensor,
    p: &ConvParams,
    d_out: &Tensor,
    want_input_grad: bool,
) -> Result<OpGradients> {
    let g = check_operands(input, weights, p)?;
    if d_out.shape() != g.output.dims() {
        return Err(Error::shape(format!(
            "conv d_out has shape {:?}, expected {:?}",
            d_out.shape(),
            g.output.dims()
        )));
    }
    let (taps, positions) = (g.taps(), g.positions());
    let in_len = g.input.item_len();
    let out_len = g.output.item_len();
    let mut d_input = Tensor::zeros(input.shape())?;
    let mut d_weights = Tensor::zeros(weights.shape())?;
    let mut d_bias = Tensor::zeros(&[p.out_channels])?;
    let mut col = vec![0.0; taps * positions];
    let mut d_col = vec![0.0; taps * positions];
    let w = weights.data();

    for ((x, dy), dx) in input
        .data()
        .chunks_exact(in_len)
        .zip(d_out.data().chunks_exact(out_len))
        .zip(d_input.data_mut().chunks_exact_mut(in_len))
    {
        g.im2col(x, &mut col);
        let dw = d_weights.data_mut();
        for (f, dy_f) in dy.chunks_exact(positions).enumerate() {
            d_bias.data_mut()[f] += dy_f.iter().sum::<f64>();
            for (k, col_k) in col.chunks_exact(positions).enumerate() {
                let dot: f64 = dy_f.iter().zip(col_k).map(|(a, b)| a * b).sum();
                dw[f * taps + k] += dot;
            }
        }
        if want_input_grad {
            d_col.fill(0.0);
            for (f, dy_f) in dy.chunks_exact(positions).enumerate() {
                for (k, dcol_k) in d_col.chunks_exact_mut(positions).enumerate() {
                    let wk = w[f * taps + k];
                    for (acc, &v) in dcol_k.iter_mut().zip(dy_f) {
                        *acc += wk * v;
                    }
                }
            }
            g.col2im(&d_col, dx);
        }
    }
    Ok(OpGradients {
        d_input,
        d_weights: Some(d_weights),
        d_bias: Some(d_bias),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::from_vec(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn dilated_taps_skip_columns() {
        let x = t(&[1, 1, 1, 5], &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let w = t(&[1, 1, 1, 3], &[1.0, 1.0, 1.0]);
        let b = t(&[1], &[0.0]);
        let mut p = ConvParams::dilated((1, 3), 1, (1, 2));
        p.padding = Padding::Valid;
        let y = conv2d_forward(&x, &w, &b, &p).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[9.0]);
    }

    #[test]
    fn zero_weights_give_bias() {
        let x = Tensor::new(&[2, 2, 3, 7], 1.5).unwrap();
        let w = Tensor::zeros(&[1, 2, 2, 3]).unwrap();
        let b = t(&[1], &[7.0]);
        let p = ConvParams::dilated((2, 3), 1, (1, 2));
        let y = conv2d_forward(&x, &w, &b, &p).unwrap();
        assert!(y.data().iter().all(|&v| v == 7.0));
    }

    #[test]
    fn same_padding_keeps_first_layer_extent() {
        let x = Tensor::new(&[1, 1, 3, 200], 0.1).unwrap();
        let w = Tensor::new(&[32, 1, 3, 20], 0.01).unwrap();
        let b = Tensor::zeros(&[32]).unwrap();
        let p = ConvParams::dilated((3, 20), 32, (1, 2));
        let y = conv2d_forward(&x, &w, &b, &p).unwrap();
        assert_eq!(y.shape(), &[1, 32, 3, 200]);
    }

    #[test]
    fn same_padding_puts_extra_zero_on_trailing_side() {
        // kernel width 2 needs one pad column, which must go on the right
        let x = t(&[1, 1, 1, 3], &[1.0, 2.0, 3.0]);
        let w = t(&[1, 1, 1, 2], &[1.0, 10.0]);
        let b = t(&[1], &[0.0]);
        let mut p = ConvParams::dilated((1, 2), 1, (1, 1));
        p.padding = Padding::Same;
        let y = conv2d_forward(&x, &w, &b, &p).unwrap();
        assert_eq!(y.data(), &[21.0, 32.0, 3.0]);
    }

    #[test]
    fn shape_errors() {
        let x = Tensor::zeros(&[1, 1, 1, 3]).unwrap();
        let w = Tensor::zeros(&[1, 1, 1, 4]).unwrap();
        let b = Tensor::zeros(&[1]).unwrap();
        let p = ConvParams::strided(4, 1, 1);
        assert!(matches!(conv2d_forward(&x, &w, &b, &p), Err(Error::Shape(_))));

        let w2 = Tensor::zeros(&[1, 2, 1, 2]).unwrap();
        let p2 = ConvParams::strided(2, 1, 1);
        assert!(matches!(conv2d_forward(&x, &w2, &b, &p2), Err(Error::Shape(_))));

        let w3 = Tensor::zeros(&[1, 1, 1, 2]).unwrap();
        let bad_dout = Tensor::zeros(&[1, 1, 1, 3]).unwrap();
        assert!(matches!(
            conv2d_backward(&x, &w3, &p2, &bad_dout),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn scalar_chain_rule() {
        let x = t(&[1, 1, 1, 1], &[3.0]);
        let w = t(&[1, 1, 1, 1], &[-2.0]);
        let p = ConvParams::strided(1, 1, 1);
        let g = conv2d_backward(&x, &w, &p, &t(&[1, 1, 1, 1], &[0.5])).unwrap();
        assert_eq!(g.d_weights.unwrap().data(), &[1.5]);
        assert_eq!(g.d_input.data(), &[-1.0]);
        assert_eq!(g.d_bias.unwrap().data(), &[0.5]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let x = Tensor::new(&[2, 1, 3, 6], 0.7).unwrap();
        let w = Tensor::new(&[2, 1, 3, 2], -0.3).unwrap();
        let p = ConvParams::dilated((3, 2), 2, (1, 2));
        let d_out = Tensor::zeros(&p.output_shape(Shape4::of(&x).unwrap()).unwrap().dims()).unwrap();
        let g = conv2d_backward(&x, &w, &p, &d_out).unwrap();
        assert!(g.d_input.data().iter().all(|&v| v == 0.0));
        assert!(g.d_weights.unwrap().data().iter().all(|&v| v == 0.0));
        assert!(g.d_bias.unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn strided_layer_preserves_rows() {
        for rows in 1..5 {
            for cols in 4..20 {
                for (k, s) in [(4, 4), (2, 2), (3, 1)] {
                    let p = ConvParams::strided(k, 3, s);
                    let out = p.output_shape(Shape4::new(2, 5, rows, cols).unwrap()).unwrap();
                    assert_eq!(out.rows, rows);
                    assert_eq!(out.cols, (cols - k) / s + 1);
                }
            }
        }
    }
}
