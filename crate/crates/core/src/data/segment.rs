use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Sample, VARIATES};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SplitMode {
    RandomFraction {
        train_frac: f64,
    },
    ByUser {
        train_users: Vec<u32>,
        test_users: Vec<u32>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentSpec {
    /// Window length K in samples.
    pub window: usize,
    /// Offset between consecutive windows; `step == window` is non-overlapping.
    pub step: usize,
    pub split: SplitMode,
    /// Split a run where consecutive timestamps differ by more than this
    /// many nanoseconds. `None` ignores timestamps.
    pub gap_threshold_ns: Option<i64>,
}

impl SegmentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::config("window length must be at least 1"));
        }
        if self.step == 0 || self.step > self.window {
            return Err(Error::config(format!(
                "step must lie in [1, {}], got {}",
                self.window, self.step
            )));
        }
        match &self.split {
            SplitMode::RandomFraction { train_frac } => {
                if !(*train_frac > 0.0 && *train_frac < 1.0) {
                    return Err(Error::config(format!(
                        "train fraction must lie in (0, 1), got {train_frac}"
                    )));
                }
            }
            SplitMode::ByUser {
                train_users,
                test_users,
            } => {
                let train: BTreeSet<_> = train_users.iter().collect();
                if let Some(u) = test_users.iter().find(|u| train.contains(u)) {
                    return Err(Error::config(format!(
                        "user {u} is listed for both train and test"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One window rendered as a one-channel image: row `r` holds variate `r`
/// (x, y, z) over the window's time steps.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    /// Shape `[1, VARIATES, window]`.
    pub image: Tensor,
    pub label: usize,
    pub user_id: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentSet {
    pub train: Vec<Segment>,
    pub test: Vec<Segment>,
    pub label_names: Vec<String>,
    pub variates: usize,
    pub window: usize,
}

impl SegmentSet {
    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn validate(&self) -> Result<()> {
        let expected = [1, self.variates, self.window];
        for s in self.train.iter().chain(&self.test) {
            if s.image.shape() != expected {
                return Err(Error::shape(format!(
                    "segment image {:?}, expected {expected:?}",
                    s.image.shape()
                )));
            }
            if s.label >= self.num_classes() {
                return Err(Error::Label {
                    label: s.label,
                    classes: self.num_classes(),
                });
            }
        }
        Ok(())
    }
}

/// Maximal stretches with one user, one activity and (optionally) no
/// timestamp gap, as index ranges into `samples`.
fn runs(samples: &[Sample], gap_ns: Option<i64>) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=samples.len() {
        let boundary = i == samples.len() || {
            let (a, b) = (&samples[i - 1], &samples[i]);
            a.user_id != b.user_id
                || a.activity != b.activity
                || gap_ns.is_some_and(|g| (b.timestamp - a.timestamp).abs() > g)
        };
        if boundary {
            if i > start {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

/// Slides a `window`-sample window over every run with the given step.
///
/// A run of length `L >= K` yields `floor((L - K) / step) + 1` windows;
/// shorter runs yield none. Values are rounded to `f32` precision so the
/// segments survive the on-disk cache unchanged. Output is ordered by user,
/// then by position in the input.
pub fn segment(samples: &[Sample], spec: &SegmentSpec) -> Result<Vec<Segment>> {
    spec.validate()?;
    let k = spec.window;
    let mut out = Vec::new();
    for run in runs(samples, spec.gap_threshold_ns) {
        let run = &samples[run];
        if run.len() < k {
            continue;
        }
        for offset in (0..=run.len() - k).step_by(spec.step) {
            let window = &run[offset..offset + k];
            let mut data = vec![0.0; VARIATES * k];
            for (t, s) in window.iter().enumerate() {
                for (row, v) in [s.x, s.y, s.z].into_iter().enumerate() {
                    data[row * k + t] = f64::from(v as f32);
                }
            }
            out.push(Segment {
                image: Tensor::from_vec(&[1, VARIATES, k], data)?,
                label: window[0].activity,
                user_id: window[0].user_id,
            });
        }
    }
    out.sort_by_key(|s| s.user_id);
    Ok(out)
}

/// Partitions segments into train and test sets.
///
/// `RandomFraction` shuffles with a ChaCha8 stream seeded by `seed` and puts
/// the first `round(frac * n)` segments in train. `ByUser` assigns by user id;
/// every user present must be listed on exactly one side.
pub fn split(
    segments: Vec<Segment>,
    mode: &SplitMode,
    seed: u64,
    label_names: Vec<String>,
) -> Result<SegmentSet> {
    let (variates, window) = match segments.first().map(|s| s.image.shape()) {
        Some(&[1, m, k]) => (m, k),
        Some(other) => return Err(Error::shape(format!("segment image shape {other:?}"))),
        None => return Err(Error::format("no segments to split")),
    };
    let (train, test) = match mode {
        SplitMode::RandomFraction { train_frac } => {
            if !(*train_frac > 0.0 && *train_frac < 1.0) {
                return Err(Error::config(format!(
                    "train fraction must lie in (0, 1), got {train_frac}"
                )));
            }
            let mut segments = segments;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            segments.shuffle(&mut rng);
            let n_train = (train_frac * segments.len() as f64).round() as usize;
            let test = segments.split_off(n_train);
            (segments, test)
        }
        SplitMode::ByUser {
            train_users,
            test_users,
        } => {
            let train_set: BTreeSet<u32> = train_users.iter().copied().collect();
            let test_set: BTreeSet<u32> = test_users.iter().copied().collect();
            if let Some(u) = train_set.intersection(&test_set).next() {
                return Err(Error::config(format!(
                    "user {u} is listed for both train and test"
                )));
            }
            let mut train = Vec::new();
            let mut test = Vec::new();
            for s in segments {
                if train_set.contains(&s.user_id) {
                    train.push(s);
                } else if test_set.contains(&s.user_id) {
                    test.push(s);
                } else {
                    return Err(Error::config(format!(
                        "user {} is in neither the train nor the test user list",
                        s.user_id
                    )));
                }
            }
            (train, test)
        }
    };
    let set = SegmentSet {
        train,
        test,
        label_names,
        variates,
        window,
    };
    set.validate()?;
    Ok(set)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    PerChannelStandardize,
}

/// Standardizes each variate row with train-set mean and (population)
/// standard deviation; the same transform is applied to the test set.
pub fn normalize(mut set: SegmentSet, mode: Normalization) -> SegmentSet {
    if mode == Normalization::None || set.train.is_empty() {
        return set;
    }
    let (m, k) = (set.variates, set.window);
    let n = (set.train.len() * k) as f64;
    let mut mean = vec![0.0; m];
    for s in &set.train {
        for (row, acc) in s.image.data().chunks_exact(k).zip(&mut mean) {
            *acc += row.iter().sum::<f64>();
        }
    }
    mean.iter_mut().for_each(|v| *v /= n);
    let mut var = vec![0.0; m];
    for s in &set.train {
        for ((row, acc), mu) in s.image.data().chunks_exact(k).zip(&mut var).zip(&mean) {
            *acc += row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>();
        }
    }
    let sd: Vec<f64> = var
        .iter()
        .enumerate()
        .map(|(ch, v)| {
            let sd = (v / n).sqrt();
            if sd > 0.0 {
                sd
            } else {
                log::warn!("channel {ch} has zero variance on the train set; dividing by 1");
                1.0
            }
        })
        .collect();
    for s in set.train.iter_mut().chain(set.test.iter_mut()) {
        for ((row, mu), sd) in s.image.data_mut().chunks_exact_mut(k).zip(&mean).zip(&sd) {
            row.iter_mut().for_each(|v| *v = (*v - mu) / sd);
        }
    }
    set
}
