use super::params::weight_shapes;
use super::{Activation, LayerKind, LayerParams, ModelParams, NetworkConfig};
use crate::error::{Error, Result};
use crate::ops::{
    conv2d_backward_impl, conv2d_forward, dense_backward, dense_forward, relu_backward,
    relu_forward, softmax_xent_backward, softmax_xent_forward,
};
use crate::tensor::{Shape4, Tensor};

/// Activations saved by [`forward`] for the matching [`backward`] call.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// What each layer consumed (dense inputs already flattened).
    inputs: Vec<Tensor>,
    /// Each layer's output before its activation.
    pre_activations: Vec<Tensor>,
    batch: usize,
}

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn pre_activations(&self) -> &[Tensor] {
        &self.pre_activations
    }
}

fn check_params(params: &ModelParams, cfg: &NetworkConfig) -> Result<()> {
    let expected = weight_shapes(cfg)?;
    if params.layers.len() != expected.len() {
        return Err(Error::shape(format!(
            "{} parameter layers for a {}-layer network",
            params.layers.len(),
            expected.len()
        )));
    }
    for (i, (p, (w, b))) in params.layers.iter().zip(&expected).enumerate() {
        if p.weights.shape() != &w[..] || p.bias.shape() != [*b] {
            return Err(Error::shape(format!(
                "layer {i}: parameters {:?}/{:?} do not match {w:?}/[{b}]",
                p.weights.shape(),
                p.bias.shape()
            )));
        }
    }
    Ok(())
}

fn run(
    params: &ModelParams,
    cfg: &NetworkConfig,
    batch: &Tensor,
    mut cache: Option<&mut ForwardCache>,
) -> Result<Tensor> {
    check_params(params, cfg)?;
    let shape = Shape4::of(batch)?;
    let expected = cfg.input_shape(shape.batch)?;
    if shape != expected {
        return Err(Error::shape(format!(
            "batch has shape {shape}, network expects {expected}"
        )));
    }
    let mut x = batch.clone();
    for (layer, p) in cfg.layers.iter().zip(&params.layers) {
        let pre = match &layer.kind {
            LayerKind::Dilated(conv) | LayerKind::Strided(conv) => {
                conv2d_forward(&x, &p.weights, &p.bias, conv)?
            }
            LayerKind::Dense { .. } => {
                if x.rank() != 2 {
                    let width = x.len() / shape.batch;
                    x = x.reshape(&[shape.batch, width])?;
                }
                dense_forward(&x, &p.weights, &p.bias)?
            }
        };
        let out = match layer.activation {
            Activation::Relu => relu_forward(&pre),
            Activation::None => pre.clone(),
        };
        if let Some(c) = cache.as_deref_mut() {
            c.inputs.push(std::mem::replace(&mut x, out));
            c.pre_activations.push(pre);
        } else {
            x = out;
        }
    }
    Ok(x)
}

/// Runs the stack on `[B, C, M, K]` and returns logits `[B, classes]`
/// together with the activations [`backward`] needs.
pub fn forward(
    params: &ModelParams,
    cfg: &NetworkConfig,
    batch: &Tensor,
) -> Result<(Tensor, ForwardCache)> {
    let mut cache = ForwardCache {
        inputs: Vec::with_capacity(cfg.layers.len()),
        pre_activations: Vec::with_capacity(cfg.layers.len()),
        batch: batch.shape().first().copied().unwrap_or(0),
    };
    let logits = run(params, cfg, batch, Some(&mut cache))?;
    Ok((logits, cache))
}

/// Gradients of the loss for every parameter, in the layout of
/// `params.layers`. The L2 term `2 lambda w` is added to weight gradients
/// (biases are not regularized).
pub fn backward(
    params: &ModelParams,
    cfg: &NetworkConfig,
    cache: Option<&ForwardCache>,
    d_logits: &Tensor,
    l2_lambda: f64,
) -> Result<Vec<LayerParams>> {
    let cache = cache.ok_or_else(|| Error::State("backward called without a forward cache".into()))?;
    if cache.inputs.len() != cfg.layers.len() {
        return Err(Error::State(format!(
            "forward cache holds {} layers, network has {}",
            cache.inputs.len(),
            cfg.layers.len()
        )));
    }
    if !(l2_lambda >= 0.0) {
        return Err(Error::config(format!(
            "L2 weight must be non-negative, got {l2_lambda}"
        )));
    }
    if d_logits.shape() != [cache.batch, cfg.num_classes] {
        return Err(Error::shape(format!(
            "d_logits has shape {:?}, expected [{}, {}]",
            d_logits.shape(),
            cache.batch,
            cfg.num_classes
        )));
    }
    let mut grads: Vec<Option<LayerParams>> = vec![None; cfg.layers.len()];
    let mut upstream = d_logits.clone();
    for (i, layer) in cfg.layers.iter().enumerate().rev() {
        let p = &params.layers[i];
        let input = &cache.inputs[i];
        if layer.activation == Activation::Relu {
            upstream = relu_backward(&cache.pre_activations[i], &upstream)?;
        }
        let g = match &layer.kind {
            LayerKind::Dilated(conv) | LayerKind::Strided(conv) => {
                conv2d_backward_impl(input, &p.weights, conv, &upstream, i > 0)?
            }
            LayerKind::Dense { .. } => dense_backward(input, &p.weights, &upstream)?,
        };
        let mut d_weights = g.d_weights.expect("layer has weights");
        if l2_lambda > 0.0 {
            for (d, &w) in d_weights.data_mut().iter_mut().zip(p.weights.data()) {
                *d += 2.0 * l2_lambda * w;
            }
        }
        grads[i] = Some(LayerParams {
            weights: d_weights,
            bias: g.d_bias.expect("layer has a bias"),
        });
        if i > 0 {
            // back to the shape the previous layer produced
            let prev_shape = cache.pre_activations[i - 1].shape().to_vec();
            upstream = g.d_input.reshape(&prev_shape)?;
        }
    }
    Ok(grads.into_iter().map(|g| g.expect("filled")).collect())
}

/// Mean cross-entropy plus `lambda * sum(w^2)`, per-row probabilities, and the
/// gradient of that objective.
pub fn loss_and_gradients(
    params: &ModelParams,
    cfg: &NetworkConfig,
    batch: &Tensor,
    labels: &[usize],
    l2_lambda: f64,
) -> Result<(f64, Tensor, Vec<LayerParams>)> {
    let (logits, cache) = forward(params, cfg, batch)?;
    let (data_loss, probs) = softmax_xent_forward(&logits, labels)?;
    let d_logits = softmax_xent_backward(&probs, labels)?;
    let grads = backward(params, cfg, Some(&cache), &d_logits, l2_lambda)?;
    Ok((data_loss + network_l2(params, l2_lambda), probs, grads))
}

pub(crate) fn network_l2(params: &ModelParams, l2_lambda: f64) -> f64 {
    if l2_lambda == 0.0 {
        return 0.0;
    }
    let sum: f64 = params
        .layers
        .iter()
        .map(|l| l.weights.data().iter().map(|w| w * w).sum::<f64>())
        .sum();
    l2_lambda * sum
}

/// A configuration with its parameters and the cache of the last forward
/// pass.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: NetworkConfig,
    pub params: ModelParams,
    cache: Option<ForwardCache>,
}

impl Model {
    pub fn new(config: NetworkConfig, params: ModelParams) -> Result<Self> {
        check_params(&params, &config)?;
        Ok(Self {
            config,
            params,
            cache: None,
        })
    }

    /// Forward pass that keeps activations for [`Model::backward`].
    pub fn forward(&mut self, batch: &Tensor) -> Result<Tensor> {
        let (logits, cache) = forward(&self.params, &self.config, batch)?;
        self.cache = Some(cache);
        Ok(logits)
    }

    pub fn backward(&self, d_logits: &Tensor, l2_lambda: f64) -> Result<Vec<LayerParams>> {
        backward(
            &self.params,
            &self.config,
            self.cache.as_ref(),
            d_logits,
            l2_lambda,
        )
    }

    /// Inference without caching; safe to call from several threads.
    pub fn predict(&self, batch: &Tensor) -> Result<Tensor> {
        run(&self.params, &self.config, batch, None)
    }
}
