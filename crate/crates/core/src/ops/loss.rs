use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn batch_dims(logits: &Tensor, labels: &[usize]) -> Result<(usize, usize)> {
    let &[batch, classes] = logits.shape() else {
        return Err(Error::shape(format!(
            "logits must be [batch, classes], got {:?}",
            logits.shape()
        )));
    };
    if labels.len() != batch {
        return Err(Error::shape(format!(
            "{} labels for a batch of {batch}",
            labels.len()
        )));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Label { label, classes });
    }
    Ok((batch, classes))
}

/// Row-wise softmax and mean cross-entropy against integer labels.
///
/// Each row is shifted by its maximum, so the loss is the log-sum-exp of the
/// shifted row minus the shifted true-class logit and never overflows.
pub fn softmax_xent_forward(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let (batch, classes) = batch_dims(logits, labels)?;
    let mut probs = logits.clone();
    let mut loss = 0.0;
    for (row, &label) in probs.data_mut().chunks_exact_mut(classes).zip(labels) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let true_shifted = row[label] - max;
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
        loss += total.ln() - true_shifted;
    }
    Ok((loss / batch as f64, probs))
}

/// `d_logits = (probs - onehot(labels)) / batch`.
pub fn softmax_xent_backward(probs: &Tensor, labels: &[usize]) -> Result<Tensor> {
    let (batch, classes) = batch_dims(probs, labels)?;
    let scale = 1.0 / batch as f64;
    let mut d = probs.clone();
    for (row, &label) in d.data_mut().chunks_exact_mut(classes).zip(labels) {
        row[label] -= 1.0;
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    Ok(d)
}

/// `lambda * sum(w^2)` over all given tensors, with gradients `2 lambda w`.
pub fn l2_penalty(weights: &[&Tensor], lambda: f64) -> Result<(f64, Vec<Tensor>)> {
    if !(lambda >= 0.0) {
        return Err(Error::config(format!(
            "L2 weight must be non-negative, got {lambda}"
        )));
    }
    let mut loss = 0.0;
    let grads = weights
        .iter()
        .map(|w| {
            loss += w.data().iter().map(|v| v * v).sum::<f64>();
            w.map(|v| 2.0 * lambda * v)
        })
        .collect();
    Ok((lambda * loss, grads))
}
