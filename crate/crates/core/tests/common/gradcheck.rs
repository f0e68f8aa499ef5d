//! Central-difference checks for every op and for a down-scaled network.

use dilconv::model::{
    forward, init_params, loss_and_gradients, Activation, InputShape, LayerSpec, ModelParams,
    NetworkConfig,
};
use dilconv::ops::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, l2_penalty, relu_backward,
    relu_forward, softmax_xent_backward, softmax_xent_forward, ConvParams, Padding,
};
use dilconv::Tensor;
use rand::Rng;

use super::{dot, FD_STEP, max_rel_err, numeric_grad, random_tensor, rng};

#[derive(Clone, Copy, Debug, Default)]
pub struct Check {
    pub max_rel_err: f64,
    pub checked: usize,
    /// Coordinates left out because a perturbation crossed a ReLU kink.
    pub skipped: usize,
}

impl Check {
    fn add(&mut self, analytic: &[f64], numeric: &[f64]) {
        self.max_rel_err = self.max_rel_err.max(max_rel_err(analytic, numeric));
        self.checked += analytic.len();
    }

    pub fn merge(self, other: Check) -> Check {
        Check {
            max_rel_err: self.max_rel_err.max(other.max_rel_err),
            checked: self.checked + other.checked,
            skipped: self.skipped + other.skipped,
        }
    }
}

pub fn conv(seed: u64) -> Check {
    let mut r = rng(seed);
    let rows = r.random_range(1..=3);
    let cols = r.random_range(8..=16);
    let channels = r.random_range(1..=2);
    let padding = [Padding::Same, Padding::SameRowsValidCols, Padding::Valid][r.random_range(0..3)];
    let p = ConvParams {
        out_channels: r.random_range(2..=4),
        filter_rows: r.random_range(1..=rows),
        filter_cols: r.random_range(1..=4),
        dilation_rows: 1,
        dilation_cols: r.random_range(1..=2),
        stride_rows: 1,
        stride_cols: r.random_range(1..=2),
        padding,
    };
    let x = random_tensor(&mut r, &[2, channels, rows, cols], 1.0);
    let w = random_tensor(&mut r, &[p.out_channels, channels, p.filter_rows, p.filter_cols], 1.0);
    let b = random_tensor(&mut r, &[p.out_channels], 1.0);
    let y = conv2d_forward(&x, &w, &b, &p).unwrap();
    let proj = random_tensor(&mut r, y.shape(), 1.0);
    let g = conv2d_backward(&x, &w, &p, &proj).unwrap();

    let mut c = Check::default();
    c.add(
        g.d_input.data(),
        &numeric_grad(&x, |x| dot(&conv2d_forward(x, &w, &b, &p).unwrap(), &proj)),
    );
    c.add(
        g.d_weights.unwrap().data(),
        &numeric_grad(&w, |w| dot(&conv2d_forward(&x, w, &b, &p).unwrap(), &proj)),
    );
    c.add(
        g.d_bias.unwrap().data(),
        &numeric_grad(&b, |b| dot(&conv2d_forward(&x, &w, b, &p).unwrap(), &proj)),
    );
    c
}

pub fn dense(seed: u64) -> Check {
    let mut r = rng(seed);
    let (batch, n, units) = (r.random_range(1..=4), r.random_range(1..=12), r.random_range(1..=6));
    let x = random_tensor(&mut r, &[batch, n], 1.0);
    let w = random_tensor(&mut r, &[n, units], 1.0);
    let b = random_tensor(&mut r, &[units], 1.0);
    let proj = random_tensor(&mut r, &[batch, units], 1.0);
    let g = dense_backward(&x, &w, &proj).unwrap();

    let mut c = Check::default();
    c.add(
        g.d_input.data(),
        &numeric_grad(&x, |x| dot(&dense_forward(x, &w, &b).unwrap(), &proj)),
    );
    c.add(
        g.d_weights.unwrap().data(),
        &numeric_grad(&w, |w| dot(&dense_forward(&x, w, &b).unwrap(), &proj)),
    );
    c.add(
        g.d_bias.unwrap().data(),
        &numeric_grad(&b, |b| dot(&dense_forward(&x, &w, b).unwrap(), &proj)),
    );
    c
}

pub fn relu(seed: u64) -> Check {
    let mut r = rng(seed);
    let n = r.random_range(1..=32);
    // keep every input well clear of the kink
    let data = (0..n)
        .map(|_| {
            let v: f64 = r.random_range(0.01..2.0);
            if r.random_bool(0.5) { v } else { -v }
        })
        .collect();
    let x = Tensor::from_vec(&[n], data).unwrap();
    let proj = random_tensor(&mut r, &[n], 1.0);
    let analytic = relu_backward(&x, &proj).unwrap();
    let mut c = Check::default();
    c.add(analytic.data(), &numeric_grad(&x, |x| dot(&relu_forward(x), &proj)));
    c
}

pub fn softmax_xent(seed: u64) -> Check {
    let mut r = rng(seed);
    let (batch, classes) = (r.random_range(1..=5), r.random_range(2..=6));
    let logits = random_tensor(&mut r, &[batch, classes], 4.0);
    let labels: Vec<usize> = (0..batch).map(|_| r.random_range(0..classes)).collect();
    let (_, probs) = softmax_xent_forward(&logits, &labels).unwrap();
    let analytic = softmax_xent_backward(&probs, &labels).unwrap();
    let mut c = Check::default();
    c.add(
        analytic.data(),
        &numeric_grad(&logits, |z| softmax_xent_forward(z, &labels).unwrap().0),
    );
    c
}

pub fn l2(seed: u64) -> Check {
    let mut r = rng(seed);
    let lambda = r.random_range(1e-5..1e-1);
    let (ra, rb) = (r.random_range(1..=4), r.random_range(1..=6));
    let a = random_tensor(&mut r, &[ra, 3], 2.0);
    let b = random_tensor(&mut r, &[rb], 2.0);
    let (_, grads) = l2_penalty(&[&a, &b], lambda).unwrap();
    let mut c = Check::default();
    c.add(
        grads[0].data(),
        &numeric_grad(&a, |a| l2_penalty(&[a, &b], lambda).unwrap().0),
    );
    c.add(
        grads[1].data(),
        &numeric_grad(&b, |b| l2_penalty(&[&a, b], lambda).unwrap().0),
    );
    c
}

/// The preset layer pattern at toy size: 3 x `cols` input, `filters` maps.
pub fn small_network(cols: usize, filters: usize) -> NetworkConfig {
    NetworkConfig {
        input: InputShape { channels: 1, rows: 3, cols },
        layers: vec![
            LayerSpec::dilated((3, 3), filters, (1, 2)),
            LayerSpec::strided(2, filters, 2),
            LayerSpec::dilated((3, 3), filters, (1, 2)),
            LayerSpec::strided(2, filters, 2),
            LayerSpec::dense(8, Activation::Relu),
            LayerSpec::dense(6, Activation::None),
        ],
        num_classes: 6,
    }
}

fn relu_pattern(params: &ModelParams, cfg: &NetworkConfig, x: &Tensor) -> Vec<bool> {
    let (_, cache) = forward(params, cfg, x).unwrap();
    cache
        .pre_activations()
        .iter()
        .zip(&cfg.layers)
        .filter(|(_, l)| l.activation == Activation::Relu)
        .flat_map(|(t, _)| t.data().iter().map(|&v| v > 0.0))
        .collect()
}

/// Whole-network loss (cross-entropy plus L2) against central differences in
/// every parameter.
pub fn network(seed: u64) -> Check {
    let mut r = rng(seed);
    let cols = [8, 12, 16][r.random_range(0..3)];
    let cfg = small_network(cols, r.random_range(2..=4));
    let batch = r.random_range(1..=3);
    let lambda = 1e-3;
    let params = init_params(&cfg, seed).unwrap();
    let x = random_tensor(&mut r, &[batch, 1, 3, cols], 2.0);
    let labels: Vec<usize> = (0..batch).map(|_| r.random_range(0..6)).collect();
    let (_, _, grads) = loss_and_gradients(&params, &cfg, &x, &labels, lambda).unwrap();
    let base = relu_pattern(&params, &cfg, &x);

    let mut c = Check::default();
    let mut probe = params.clone();
    for (li, g) in grads.iter().enumerate() {
        for (which, grad) in [&g.weights, &g.bias].into_iter().enumerate() {
            for i in 0..grad.len() {
                let orig = param_mut(&mut probe, li, which).data()[i];
                let mut eval = |v: f64| {
                    param_mut(&mut probe, li, which).data_mut()[i] = v;
                    let loss = loss_and_gradients(&probe, &cfg, &x, &labels, lambda).unwrap().0;
                    (loss, relu_pattern(&probe, &cfg, &x))
                };
                let (up, up_mask) = eval(orig + FD_STEP);
                let (down, down_mask) = eval(orig - FD_STEP);
                param_mut(&mut probe, li, which).data_mut()[i] = orig;
                if up_mask != base || down_mask != base {
                    c.skipped += 1;
                    continue;
                }
                c.add(&[grad.data()[i]], &[(up - down) / (2.0 * FD_STEP)]);
            }
        }
    }
    c
}

fn param_mut(p: &mut ModelParams, layer: usize, which: usize) -> &mut Tensor {
    let l = &mut p.layers[layer];
    if which == 0 {
        &mut l.weights
    } else {
        &mut l.bias
    }
}
