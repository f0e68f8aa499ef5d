//! Test-only oracles, kept independent of the library's kernels.
#![allow(dead_code)]

use dilconv::ops::{ConvParams, Padding};
use dilconv::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_REL_TOL: f64 = 1e-4;
/// Denominator floor for relative error, so gradients that are zero up to
/// rounding compare on absolute error.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// Central difference of `f` with respect to every element of `x`.
pub fn numeric_grad(x: &Tensor, mut f: impl FnMut(&Tensor) -> f64) -> Vec<f64> {
    let mut probe = x.clone();
    (0..x.len())
        .map(|i| {
            let orig = probe.data()[i];
            probe.data_mut()[i] = orig + FD_STEP;
            let up = f(&probe);
            probe.data_mut()[i] = orig - FD_STEP;
            let down = f(&probe);
            probe.data_mut()[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Largest relative error between an analytic gradient and central
/// differences.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_err(a, n))
        .fold(0.0, f64::max)
}

pub fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn plan(n: usize, f: usize, d: usize, s: usize, same: bool) -> Option<(usize, usize)> {
    let eff = (f - 1) * d + 1;
    if same {
        let out = n.div_ceil(s);
        let total = ((out - 1) * s + eff).saturating_sub(n);
        Some((out, total / 2))
    } else if eff > n {
        None
    } else {
        Some(((n - eff) / s + 1, 0))
    }
}

/// Direct convolution: materialize the zero-padded input, then seven nested
/// loops. Taps are accumulated onto the bias in (channel, row, col) order.
/// `None` when the kernel does not fit.
pub fn naive_conv(x: &Tensor, w: &Tensor, b: &Tensor, p: &ConvParams) -> Option<Tensor> {
    let &[bs, c, r, wd] = x.shape() else { panic!("rank 4") };
    let &[f, c2, fr, fc] = w.shape() else { panic!("rank 4") };
    assert_eq!(c, c2);
    let same_rows = matches!(p.padding, Padding::Same | Padding::SameRowsValidCols);
    let same_cols = p.padding == Padding::Same;
    let (or, pt) = plan(r, fr, p.dilation_rows, p.stride_rows, same_rows)?;
    let (oc, pl) = plan(wd, fc, p.dilation_cols, p.stride_cols, same_cols)?;

    // padded copy, generous on the trailing side
    let pr = (or - 1) * p.stride_rows + (fr - 1) * p.dilation_rows + 1;
    let pc = (oc - 1) * p.stride_cols + (fc - 1) * p.dilation_cols + 1;
    let (pr, pc) = (pr.max(r + pt), pc.max(wd + pl));
    let mut padded = vec![0.0; bs * c * pr * pc];
    for bi in 0..bs {
        for ci in 0..c {
            for ri in 0..r {
                for wi in 0..wd {
                    padded[((bi * c + ci) * pr + ri + pt) * pc + wi + pl] =
                        x.get(&[bi, ci, ri, wi]).unwrap();
                }
            }
        }
    }

    let mut out = Tensor::zeros(&[bs, f, or, oc]).unwrap();
    for bi in 0..bs {
        for fi in 0..f {
            for ro in 0..or {
                for co in 0..oc {
                    let mut acc = b.data()[fi];
                    for ci in 0..c {
                        for i in 0..fr {
                            for j in 0..fc {
                                let rr = ro * p.stride_rows + i * p.dilation_rows;
                                let cc = co * p.stride_cols + j * p.dilation_cols;
                                acc += padded[((bi * c + ci) * pr + rr) * pc + cc]
                                    * w.get(&[fi, ci, i, j]).unwrap();
                            }
                        }
                    }
                    out.set(&[bi, fi, ro, co], acc).unwrap();
                }
            }
        }
    }
    Some(out)
}
pub mod gradcheck;
