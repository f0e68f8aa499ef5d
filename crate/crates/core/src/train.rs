//! Mini-batch training with Adam and per-epoch evaluation.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Segment, SegmentSet};
use crate::error::{Error, Result};
use crate::metrics::{argmax, EvalReport};
use crate::model::{self, init_params, ModelParams, NetworkConfig};
use crate::ops::{softmax_xent_backward, softmax_xent_forward};
use crate::optim::{Selection, TrainConfig};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's training segments plus the L2
    /// penalty at the end of the epoch.
    pub train_loss: f64,
    /// Fraction of training segments classified correctly by the parameters
    /// in force when their batch was processed.
    pub train_accuracy: f64,
    pub test: Option<EvalReport>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<EpochRecord>,
    pub selection: Selection,
}

impl RunLog {
    /// Epoch whose parameters `train` returned.
    pub fn selected_epoch(&self) -> Option<usize> {
        match self.selection {
            Selection::Final => self.records.last().map(|r| r.epoch),
            Selection::Best => self.best_epoch().or_else(|| self.records.last().map(|r| r.epoch)),
        }
    }

    /// Earliest epoch with the highest test weighted F1.
    pub fn best_epoch(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for r in &self.records {
            if let Some(t) = &r.test {
                if best.is_none_or(|(_, f)| t.weighted_f1 > f) {
                    best = Some((r.epoch, t.weighted_f1));
                }
            }
        }
        best.map(|(e, _)| e)
    }

    pub fn record(&self, epoch: usize) -> Option<&EpochRecord> {
        self.records.iter().find(|r| r.epoch == epoch)
    }

    /// True when both logs agree on everything except wall-clock time.
    pub fn same_trajectory(&self, other: &RunLog) -> bool {
        self.selection == other.selection
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.epoch == b.epoch
                    && a.train_loss.to_bits() == b.train_loss.to_bits()
                    && a.train_accuracy.to_bits() == b.train_accuracy.to_bits()
                    && a.test == b.test
            })
    }

    /// One JSON object per epoch, newline-terminated.
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str, selection: Selection) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .map_err(|e| Error::format(format!("run log line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<EpochRecord>>>()?;
        if records.windows(2).any(|w| w[0].epoch >= w[1].epoch) {
            return Err(Error::format("run log epochs are not strictly increasing"));
        }
        Ok(Self { records, selection })
    }
}

/// Stacks segment images into a `[B, 1, M, K]` batch.
pub fn make_batch(segments: &[&Segment], cfg: &NetworkConfig) -> Result<Tensor> {
    let shape = cfg.input_shape(segments.len())?;
    let item = shape.item_len();
    let mut data = Vec::with_capacity(item * segments.len());
    for s in segments {
        if s.image.len() != item || s.image.shape()[s.image.rank() - 2..] != [shape.rows, shape.cols] {
            return Err(Error::shape(format!(
                "segment image {:?} does not fit network input {shape}",
                s.image.shape()
            )));
        }
        data.extend_from_slice(s.image.data());
    }
    Tensor::from_vec(&shape.dims(), data)
}

/// Cross-entropy of one logits row, computed the same way as the batch loss.
fn row_xent(row: &[f64], label: usize) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = row.iter().map(|v| (v - max).exp()).sum();
    total.ln() - (row[label] - max)
}

const EVAL_BATCH: usize = 256;

/// Argmax predictions (lowest index on ties) for every segment.
pub fn predict(params: &ModelParams, cfg: &NetworkConfig, segments: &[Segment]) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(segments.len());
    let model = model::Model::new(cfg.clone(), params.clone())?;
    for chunk in segments.chunks(EVAL_BATCH) {
        let refs: Vec<&Segment> = chunk.iter().collect();
        let logits = model.predict(&make_batch(&refs, cfg)?)?;
        out.extend(logits.data().chunks_exact(cfg.num_classes).map(argmax));
    }
    Ok(out)
}

pub fn evaluate(params: &ModelParams, cfg: &NetworkConfig, segments: &[Segment]) -> Result<EvalReport> {
    if segments.is_empty() {
        return Err(Error::config("no segments to evaluate"));
    }
    let predicted = predict(params, cfg, segments)?;
    let truth: Vec<usize> = segments.iter().map(|s| s.label).collect();
    EvalReport::from_predictions(&truth, &predicted, cfg.num_classes)
}

/// Trains from a fresh seeded initialization.
pub fn train(
    set: &SegmentSet,
    cfg: &NetworkConfig,
    tcfg: &TrainConfig,
) -> Result<(ModelParams, RunLog)> {
    let params = init_params(cfg, tcfg.seed)?;
    train_from(set, cfg, tcfg, params)
}

/// Trains starting from `params`.
///
/// Each epoch shuffles the training segments with a ChaCha8 stream keyed by
/// `(seed, epoch)`, runs mini-batches of `batch_size` (the short final batch
/// is kept), and evaluates on the test segments when there are any.
pub fn train_from(
    set: &SegmentSet,
    cfg: &NetworkConfig,
    tcfg: &TrainConfig,
    mut params: ModelParams,
) -> Result<(ModelParams, RunLog)> {
    tcfg.validate()?;
    cfg.validate()?;
    if set.train.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    if set.num_classes() != cfg.num_classes {
        return Err(Error::config(format!(
            "data has {} classes, network outputs {}",
            set.num_classes(),
            cfg.num_classes
        )));
    }
    let n = set.train.len();
    let mut log = RunLog {
        records: Vec::with_capacity(tcfg.epochs),
        selection: tcfg.selection,
    };
    let mut best: Option<(f64, ModelParams)> = None;
    let mut sample_loss = vec![0.0; n];

    for epoch in 1..=tcfg.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);

        let mut correct = 0usize;
        for (step, idx) in order.chunks(tcfg.batch_size).enumerate() {
            let segs: Vec<&Segment> = idx.iter().map(|&i| &set.train[i]).collect();
            let labels: Vec<usize> = segs.iter().map(|s| s.label).collect();
            let batch = make_batch(&segs, cfg)?;
            let (logits, cache) = model::forward(&params, cfg, &batch)?;
            let (loss, probs) = softmax_xent_forward(&logits, &labels)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    step: step + 1,
                    loss,
                });
            }
            for ((row, &label), &i) in logits
                .data()
                .chunks_exact(cfg.num_classes)
                .zip(&labels)
                .zip(idx)
            {
                sample_loss[i] = row_xent(row, label);
                correct += usize::from(argmax(row) == label);
            }
            let d_logits = softmax_xent_backward(&probs, &labels)?;
            let grads = model::backward(&params, cfg, Some(&cache), &d_logits, tcfg.l2_lambda)?;
            let ModelParams { layers, opt_state } = &mut params;
            let targets = layers.iter_mut().flat_map(|l| [&mut l.weights, &mut l.bias]);
            let grads = grads.iter().flat_map(|g| [&g.weights, &g.bias]);
            for ((param, grad), state) in targets.zip(grads).zip(opt_state.iter_mut()) {
                state.step(param, grad, tcfg)?;
            }
        }

        // summed in segment order so the value does not depend on the shuffle
        let train_loss = sample_loss.iter().sum::<f64>() / n as f64
            + model::network_l2(&params, tcfg.l2_lambda);
        if !train_loss.is_finite() || !params.all_finite() {
            return Err(Error::Divergence {
                epoch,
                step: n.div_ceil(tcfg.batch_size),
                loss: train_loss,
            });
        }
        let test = if set.test.is_empty() {
            None
        } else {
            Some(evaluate(&params, cfg, &set.test)?)
        };
        if let Some(t) = &test {
            if tcfg.selection == Selection::Best
                && best.as_ref().is_none_or(|(f, _)| t.weighted_f1 > *f)
            {
                best = Some((t.weighted_f1, params.clone()));
            }
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            train_accuracy: correct as f64 / n as f64,
            test,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: loss {:.5} train acc {:.4} test wF1 {} ({:.1}s)",
            record.train_loss,
            record.train_accuracy,
            record
                .test
                .as_ref()
                .map_or("-".to_string(), |t| format!("{:.4}", t.weighted_f1)),
            record.seconds
        );
        log.records.push(record);
    }

    let params = match best {
        Some((_, p)) if tcfg.selection == Selection::Best => p,
        _ => params,
    };
    Ok((params, log))
}
