//! Run manifests: flat TOML files describing one prepare/train/evaluate run.
//!
//! ```toml
//! dataset_path = "data/WISDM_ar_v1.1_raw.txt"
//! dataset_kind = "v1_split"      # v1_split | v1_individual | v2 | custom
//! out_dir = "runs/v1_split"
//! epochs = 50
//! seed = 7
//! ```
//!
//! Everything else defaults from `dataset_kind`. Custom stacks go in a
//! `layers` array of inline tables:
//!
//! ```toml
//! layers = [
//!   { kind = "DL", filter = [3, 10], filters = 32, dilation = [1, 2] },
//!   { kind = "SL", filter = [1, 4], filters = 32, stride = [1, 4] },
//!   { kind = "FL", units = 1024 },
//!   { kind = "FL", units = 6 },
//! ]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{LabelScheme, Normalization, SegmentSpec, SplitMode, VARIATES};
use crate::error::{Error, Result};
use crate::model::{Activation, InputShape, LayerKind, LayerSpec, NetworkConfig, Preset};
use crate::ops::{ConvParams, Padding};
use crate::optim::{Selection, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    V1Split,
    V1Individual,
    V2,
    Custom,
}

impl DatasetKind {
    /// Train/test counts of the reference dataset constructions.
    pub fn reference_counts(self) -> Option<(usize, usize)> {
        match self {
            DatasetKind::V1Split => Some((8347, 2643)),
            DatasetKind::V1Individual => Some((41729, 13162)),
            DatasetKind::V2 => Some((10396, 4456)),
            DatasetKind::Custom => None,
        }
    }

    fn preset(self) -> Option<Preset> {
        match self {
            DatasetKind::V1Split => Some(Preset::V1Split),
            DatasetKind::V1Individual => Some(Preset::V1Individual),
            DatasetKind::V2 => Some(Preset::V2),
            DatasetKind::Custom => None,
        }
    }

    fn scheme(self) -> Option<LabelScheme> {
        match self {
            DatasetKind::V1Split | DatasetKind::V1Individual => Some(LabelScheme::V1),
            DatasetKind::V2 => Some(LabelScheme::V2),
            DatasetKind::Custom => None,
        }
    }

    /// (window, step, split, L2 weight)
    fn segmentation(self) -> Option<(usize, usize, SplitMode, f64)> {
        match self {
            // train fractions reproduce the reference train/test counts
            DatasetKind::V1Split => Some((
                100,
                100,
                SplitMode::RandomFraction {
                    train_frac: V1_SPLIT_TRAIN_FRAC,
                },
                1e-3,
            )),
            DatasetKind::V1Individual => Some((
                200,
                20,
                SplitMode::ByUser {
                    train_users: (1..=28).collect(),
                    test_users: (29..=36).collect(),
                },
                1e-5,
            )),
            DatasetKind::V2 => Some((
                200,
                200,
                SplitMode::RandomFraction {
                    train_frac: V2_TRAIN_FRAC,
                },
                1e-5,
            )),
            DatasetKind::Custom => None,
        }
    }
}

/// 8347 / (8347 + 2643).
pub const V1_SPLIT_TRAIN_FRAC: f64 = 8347.0 / 10990.0;
/// 10396 / (10396 + 4456).
pub const V2_TRAIN_FRAC: f64 = 10396.0 / 14852.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    Random,
    ByUser,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerEntry {
    pub kind: String,
    pub filter: Option<[usize; 2]>,
    pub filters: Option<usize>,
    pub dilation: Option<[usize; 2]>,
    pub stride: Option<[usize; 2]>,
    pub units: Option<usize>,
}

impl LayerEntry {
    fn to_spec(&self, index: usize, last: bool) -> Result<LayerSpec> {
        fn need<T>(v: Option<T>, index: usize, kind: &str, what: &str) -> Result<T> {
            v.ok_or_else(|| Error::config(format!("layer {index} ({kind}) needs `{what}`")))
        }
        let activation = if last {
            Activation::None
        } else {
            Activation::Relu
        };
        let conv = |padding: Padding| -> Result<ConvParams> {
            let [fr, fc] = need(self.filter, index, &self.kind, "filter")?;
            let [dr, dc] = self.dilation.unwrap_or([1, 1]);
            let [sr, sc] = self.stride.unwrap_or([1, 1]);
            Ok(ConvParams {
                filter_rows: fr,
                filter_cols: fc,
                out_channels: need(self.filters, index, &self.kind, "filters")?,
                dilation_rows: dr,
                dilation_cols: dc,
                stride_rows: sr,
                stride_cols: sc,
                padding,
            })
        };
        let kind = match self.kind.to_ascii_uppercase().as_str() {
            "DL" => LayerKind::Dilated(conv(Padding::Same)?),
            "SL" => LayerKind::Strided(conv(Padding::Valid)?),
            "FL" => LayerKind::Dense {
                units: need(self.units, index, &self.kind, "units")?,
            },
            other => {
                return Err(Error::config(format!(
                    "layer {index}: unknown kind {other:?} (expected DL, SL or FL)"
                )))
            }
        };
        Ok(LayerSpec { kind, activation })
    }
}

/// A manifest as written in the file; unset fields take kind defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunManifest {
    pub dataset_path: Option<PathBuf>,
    pub dataset_kind: Option<DatasetKind>,
    pub label_scheme: Option<LabelScheme>,
    pub window: Option<usize>,
    pub step: Option<usize>,
    pub split: Option<SplitKind>,
    pub train_frac: Option<f64>,
    pub train_users: Option<Vec<u32>>,
    pub test_users: Option<Vec<u32>>,
    pub gap_threshold_ms: Option<u64>,
    pub preset: Option<String>,
    pub layers: Option<Vec<LayerEntry>>,
    pub normalize: Option<Normalization>,
    pub out_dir: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub learning_rate: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub epsilon: Option<f64>,
    pub batch_size: Option<usize>,
    pub l2_lambda: Option<f64>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub selection: Option<Selection>,
}

/// A manifest with every default applied and checked.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedRun {
    pub dataset_path: Option<PathBuf>,
    pub kind: DatasetKind,
    pub scheme: LabelScheme,
    pub segment: SegmentSpec,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub normalize: Normalization,
    pub out_dir: PathBuf,
    pub cache_path: PathBuf,
}

impl ResolvedRun {
    pub fn checkpoint_path(&self) -> PathBuf {
        self.out_dir.join("model.ckpt")
    }

    pub fn runlog_path(&self) -> PathBuf {
        self.out_dir.join("runlog.jsonl")
    }
}

impl RunManifest {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("manifest: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Self::parse(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        // relative paths are taken relative to the manifest
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut m.dataset_path, &mut m.out_dir, &mut m.cache]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(m)
    }

    pub fn resolve(&self) -> Result<ResolvedRun> {
        let kind = self.dataset_kind.unwrap_or(DatasetKind::Custom);
        let missing = |what: &str| {
            Error::config(format!("manifest: `{what}` is required for dataset_kind = custom"))
        };
        let scheme = match (self.label_scheme, kind.scheme()) {
            (Some(s), _) | (None, Some(s)) => s,
            (None, None) => return Err(missing("label_scheme")),
        };
        let defaults = kind.segmentation();
        let window = self
            .window
            .or(defaults.as_ref().map(|d| d.0))
            .ok_or_else(|| missing("window"))?;
        let step = self.step.or(defaults.as_ref().map(|d| d.1)).unwrap_or(window);
        let split_kind = self.split.or(match defaults.as_ref().map(|d| &d.2) {
            Some(SplitMode::RandomFraction { .. }) => Some(SplitKind::Random),
            Some(SplitMode::ByUser { .. }) => Some(SplitKind::ByUser),
            None => None,
        });
        let split = match split_kind.ok_or_else(|| missing("split"))? {
            SplitKind::Random => SplitMode::RandomFraction {
                train_frac: self
                    .train_frac
                    .or(match defaults.as_ref().map(|d| &d.2) {
                        Some(SplitMode::RandomFraction { train_frac }) => Some(*train_frac),
                        _ => None,
                    })
                    .unwrap_or(0.8),
            },
            SplitKind::ByUser => {
                let (dtrain, dtest) = match defaults.as_ref().map(|d| &d.2) {
                    Some(SplitMode::ByUser {
                        train_users,
                        test_users,
                    }) => (Some(train_users.clone()), Some(test_users.clone())),
                    _ => (None, None),
                };
                SplitMode::ByUser {
                    train_users: self
                        .train_users
                        .clone()
                        .or(dtrain)
                        .ok_or_else(|| Error::config("manifest: by_user split needs `train_users`"))?,
                    test_users: self
                        .test_users
                        .clone()
                        .or(dtest)
                        .ok_or_else(|| Error::config("manifest: by_user split needs `test_users`"))?,
                }
            }
        };
        let segment = SegmentSpec {
            window,
            step,
            split,
            gap_threshold_ns: self.gap_threshold_ms.map(|ms| ms as i64 * 1_000_000),
        };
        segment.validate()?;

        let network = match (&self.layers, &self.preset) {
            (Some(_), Some(_)) => {
                return Err(Error::config("manifest: give either `preset` or `layers`, not both"))
            }
            (Some(entries), None) => {
                let layers = entries
                    .iter()
                    .enumerate()
                    .map(|(i, e)| e.to_spec(i, i + 1 == entries.len()))
                    .collect::<Result<Vec<_>>>()?;
                NetworkConfig {
                    input: InputShape {
                        channels: 1,
                        rows: VARIATES,
                        cols: window,
                    },
                    layers,
                    num_classes: scheme.names().len(),
                }
            }
            (None, Some(name)) => name.parse::<Preset>()?.config(),
            (None, None) => kind
                .preset()
                .ok_or_else(|| missing("preset` or `layers"))?
                .config(),
        };
        network.validate()?;
        if network.input.cols != window || network.input.rows != VARIATES {
            return Err(Error::config(format!(
                "network input {}x{} does not match windows of {VARIATES}x{window}",
                network.input.rows, network.input.cols
            )));
        }

        let base = TrainConfig::default();
        let train = TrainConfig {
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            beta1: self.beta1.unwrap_or(base.beta1),
            beta2: self.beta2.unwrap_or(base.beta2),
            epsilon: self.epsilon.unwrap_or(base.epsilon),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            l2_lambda: self
                .l2_lambda
                .or(defaults.as_ref().map(|d| d.3))
                .unwrap_or(base.l2_lambda),
            epochs: self.epochs.unwrap_or(base.epochs),
            seed: self.seed.unwrap_or(base.seed),
            selection: self.selection.unwrap_or(base.selection),
        };
        train.validate()?;

        let out_dir = self.out_dir.clone().unwrap_or_else(|| PathBuf::from("runs"));
        let cache_path = self
            .cache
            .clone()
            .unwrap_or_else(|| out_dir.join("segments.bin"));
        Ok(ResolvedRun {
            dataset_path: self.dataset_path.clone(),
            kind,
            scheme,
            segment,
            network,
            train,
            normalize: self.normalize.unwrap_or_default(),
            out_dir,
            cache_path,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_defaults() {
        let m = RunManifest::parse("dataset_kind = \"v1_individual\"\n").unwrap();
        let r = m.resolve().unwrap();
        assert_eq!((r.segment.window, r.segment.step), (200, 20));
        assert!(matches!(&r.segment.split, SplitMode::ByUser { train_users, test_users }
            if train_users.len() == 28 && test_users.len() == 8));
        assert_eq!(r.network, Preset::V1Individual.config());
        assert_eq!(r.train.l2_lambda, 1e-5);
        assert_eq!(r.train.batch_size, 256);
        assert_eq!(r.train.learning_rate, 1e-4);

        let r = RunManifest::parse("dataset_kind = \"v1_split\"").unwrap().resolve().unwrap();
        assert_eq!((r.segment.window, r.segment.step), (100, 100));
        assert_eq!(r.train.l2_lambda, 1e-3);
        assert_eq!(r.scheme, LabelScheme::V1);

        let r = RunManifest::parse("dataset_kind = \"v2\"").unwrap().resolve().unwrap();
        assert_eq!((r.segment.window, r.segment.step), (200, 200));
        assert_eq!(r.scheme, LabelScheme::V2);
        assert_eq!(r.network.layers.len(), 8);
    }

    #[test]
    fn custom_layers() {
        let text = r#"
            dataset_kind = "custom"
            label_scheme = "v1"
            window = 16
            split = "random"
            train_frac = 0.75
            layers = [
              { kind = "DL", filter = [3, 3], filters = 4, dilation = [1, 2] },
              { kind = "SL", filter = [1, 2], filters = 4, stride = [1, 2] },
              { kind = "FL", units = 8 },
              { kind = "FL", units = 6 },
            ]
        "#;
        let r = RunManifest::parse(text).unwrap().resolve().unwrap();
        assert_eq!(r.network.layers.len(), 4);
        assert_eq!(r.network.layers[3].activation, Activation::None);
        assert_eq!(r.network.layers[2].activation, Activation::Relu);
        assert_eq!(r.segment.step, 16);
    }

    #[test]
    fn errors() {
        assert!(RunManifest::parse("bogus_key = 1").is_err());
        assert!(RunManifest::parse("dataset_kind = \"custom\"").unwrap().resolve().is_err());
        let bad = RunManifest::parse("dataset_kind = \"v2\"\npreset = \"v9\"").unwrap();
        assert!(matches!(bad.resolve(), Err(Error::Config(_))));
        // v1_split preset expects 100-sample windows
        let mismatch = RunManifest::parse("dataset_kind = \"v2\"\npreset = \"v1_split\"").unwrap();
        assert!(mismatch.resolve().is_err());
        let overlap = RunManifest::parse(
            "dataset_kind = \"v1_individual\"\ntrain_users = [1, 2]\ntest_users = [2]",
        )
        .unwrap();
        assert!(overlap.resolve().is_err());
    }
}
