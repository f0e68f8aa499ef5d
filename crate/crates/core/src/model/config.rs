use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ops::ConvParams;
use crate::tensor::Shape4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    None,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    /// DL: unit-stride convolution, usually dilated along time.
    Dilated(ConvParams),
    /// SL: one-row filter applied to each row separately; shrinks time only.
    Strided(ConvParams),
    /// FL: fully connected.
    Dense { units: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn dilated(filter: (usize, usize), filters: usize, dilation: (usize, usize)) -> Self {
        Self {
            kind: LayerKind::Dilated(ConvParams::dilated(filter, filters, dilation)),
            activation: Activation::Relu,
        }
    }

    pub fn strided(filter_cols: usize, filters: usize, stride_cols: usize) -> Self {
        Self {
            kind: LayerKind::Strided(ConvParams::strided(filter_cols, filters, stride_cols)),
            activation: Activation::Relu,
        }
    }

    pub fn dense(units: usize, activation: Activation) -> Self {
        Self {
            kind: LayerKind::Dense { units },
            activation,
        }
    }

    pub fn conv(&self) -> Option<&ConvParams> {
        match &self.kind {
            LayerKind::Dilated(p) | LayerKind::Strided(p) => Some(p),
            LayerKind::Dense { .. } => None,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self.kind {
            LayerKind::Dilated(_) => "DL",
            LayerKind::Strided(_) => "SL",
            LayerKind::Dense { .. } => "FL",
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        let fail = |msg: &str| Err(Error::config(format!("layer {index} ({}): {msg}", self.tag())));
        match &self.kind {
            LayerKind::Dilated(p) => {
                p.validate()?;
                if !p.is_dilated_layer() {
                    return fail("dilated layers must use stride 1 on both axes");
                }
            }
            LayerKind::Strided(p) => {
                p.validate()?;
                if !p.is_strided_layer() {
                    return fail("strided layers need a one-row filter and no dilation");
                }
            }
            LayerKind::Dense { units: 0 } => return fail("units must be at least 1"),
            LayerKind::Dense { .. } => {}
        }
        Ok(())
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            LayerKind::Dilated(p) => write!(
                f,
                "DL (filter ({},{}), filters {}, dilation ({},{}))",
                p.filter_rows, p.filter_cols, p.out_channels, p.dilation_rows, p.dilation_cols
            ),
            LayerKind::Strided(p) => write!(
                f,
                "SL (filter ({},{}), filters {}, stride ({},{}))",
                p.filter_rows, p.filter_cols, p.out_channels, p.stride_rows, p.stride_cols
            ),
            LayerKind::Dense { units } => write!(f, "FL (units {units})"),
        }
    }
}

/// Output of one layer: a feature-map batch or a flat `[batch, units]` matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerShape {
    Image(Shape4),
    Flat { batch: usize, units: usize },
}

impl LayerShape {
    pub fn dims(&self) -> Vec<usize> {
        match *self {
            LayerShape::Image(s) => s.dims().to_vec(),
            LayerShape::Flat { batch, units } => vec![batch, units],
        }
    }

    /// Width of the row a dense layer sees after channel-major flattening.
    pub fn flat_len(&self) -> usize {
        match *self {
            LayerShape::Image(s) => s.item_len(),
            LayerShape::Flat { units, .. } => units,
        }
    }
}

impl fmt::Display for LayerShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerShape::Image(s) => write!(f, "{s}"),
            LayerShape::Flat { batch, units } => write!(f, "[{batch},{units}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Per-item input extents; the batch extent is ignored.
    pub input: InputShape,
    pub layers: Vec<LayerSpec>,
    pub num_classes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InputShape {
    pub channels: usize,
    pub rows: usize,
    pub cols: usize,
}

impl NetworkConfig {
    pub fn input_shape(&self, batch: usize) -> Result<Shape4> {
        Shape4::new(batch, self.input.channels, self.input.rows, self.input.cols)
    }

    pub fn validate(&self) -> Result<()> {
        shape_check(self).map(|_| ())
    }

    /// SHA-256 over the canonical JSON encoding.
    pub fn digest(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).into()
    }

    pub fn digest_hex(&self) -> String {
        self.digest().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Returns a copy with every conv filter count and the hidden dense
    /// widths replaced, keeping geometry. Used for down-scaled test nets.
    pub fn with_widths(&self, filters: usize, hidden_units: usize) -> Self {
        let mut cfg = self.clone();
        let last = cfg.layers.len() - 1;
        for (i, layer) in cfg.layers.iter_mut().enumerate() {
            match &mut layer.kind {
                LayerKind::Dilated(p) | LayerKind::Strided(p) => p.out_channels = filters,
                LayerKind::Dense { units } if i != last => *units = hidden_units,
                LayerKind::Dense { .. } => {}
            }
        }
        cfg
    }
}

/// Propagates shapes through the stack (batch extent 1) and checks every
/// layer is feasible. Returns one output shape per layer.
pub fn shape_check(cfg: &NetworkConfig) -> Result<Vec<LayerShape>> {
    if cfg.num_classes == 0 {
        return Err(Error::config("num_classes must be at least 1"));
    }
    match cfg.layers.last() {
        Some(LayerSpec {
            kind: LayerKind::Dense { units },
            activation: Activation::None,
        }) if *units == cfg.num_classes => {}
        _ => {
            return Err(Error::config(format!(
                "the last layer must be FL with {} units and no activation",
                cfg.num_classes
            )))
        }
    }
    let mut current = LayerShape::Image(cfg.input_shape(1)?);
    let mut out = Vec::with_capacity(cfg.layers.len());
    for (i, layer) in cfg.layers.iter().enumerate() {
        layer.validate(i)?;
        current = match (&layer.kind, current) {
            (LayerKind::Dilated(p) | LayerKind::Strided(p), LayerShape::Image(s)) => {
                LayerShape::Image(p.output_shape(s).map_err(|e| {
                    Error::shape(format!("layer {i} ({}) is infeasible on {s}: {e}", layer.tag()))
                })?)
            }
            (LayerKind::Dilated(_) | LayerKind::Strided(_), LayerShape::Flat { .. }) => {
                return Err(Error::shape(format!(
                    "layer {i} ({}) follows a fully connected layer",
                    layer.tag()
                )))
            }
            (LayerKind::Dense { units }, _) => LayerShape::Flat {
                batch: 1,
                units: *units,
            },
        };
        out.push(current);
    }
    Ok(out)
}

/// The three reference layer stacks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    V1Individual,
    V1Split,
    V2,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::V1Individual, Preset::V1Split, Preset::V2];

    pub fn name(self) -> &'static str {
        match self {
            Preset::V1Individual => "v1_individual",
            Preset::V1Split => "v1_split",
            Preset::V2 => "v2",
        }
    }

    pub fn config(self) -> NetworkConfig {
        use LayerSpec as L;
        let (cols, layers) = match self {
            Preset::V1Individual => (
                200,
                vec![
                    L::dilated((3, 20), 32, (1, 2)),
                    L::strided(4, 32, 4),
                    L::dilated((3, 3), 32, (1, 2)),
                    L::strided(4, 32, 4),
                    L::dense(1024, Activation::Relu),
                    L::dense(6, Activation::None),
                ],
            ),
            Preset::V1Split => (
                100,
                vec![
                    L::dilated((3, 10), 32, (1, 2)),
                    L::strided(4, 32, 4),
                    L::dilated((3, 3), 32, (1, 2)),
                    L::strided(2, 32, 2),
                    L::dense(1024, Activation::Relu),
                    L::dense(6, Activation::None),
                ],
            ),
            Preset::V2 => (
                200,
                vec![
                    L::dilated((3, 10), 32, (1, 2)),
                    L::strided(2, 32, 2),
                    L::dilated((3, 3), 32, (1, 2)),
                    L::strided(2, 32, 2),
                    L::dilated((3, 3), 64, (1, 1)),
                    L::strided(2, 64, 2),
                    L::dense(512, Activation::Relu),
                    L::dense(6, Activation::None),
                ],
            ),
        };
        NetworkConfig {
            input: InputShape {
                channels: 1,
                rows: 3,
                cols,
            },
            layers,
            num_classes: 6,
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s.trim().replace('-', "_"))
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown preset {s:?} (expected v1_individual, v1_split or v2)"
                ))
            })
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn preset(name: &str) -> Result<NetworkConfig> {
    name.parse::<Preset>().map(Preset::config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(shapes: &[LayerShape]) -> Vec<Vec<usize>> {
        shapes.iter().map(LayerShape::dims).collect()
    }

    #[test]
    fn v1_individual_table() {
        let cfg = preset("v1_individual").unwrap();
        assert_eq!(cfg.layers.len(), 6);
        let shapes = shape_check(&cfg).unwrap();
        assert_eq!(
            dims(&shapes),
            vec![
                vec![1, 32, 3, 200],
                vec![1, 32, 3, 50],
                vec![1, 32, 3, 50],
                vec![1, 32, 3, 12],
                vec![1, 1024],
                vec![1, 6],
            ]
        );
        assert_eq!(shapes[3].flat_len(), 1152);
    }

    #[test]
    fn v1_split_table() {
        let cfg = preset("v1_split").unwrap();
        let shapes = shape_check(&cfg).unwrap();
        assert_eq!(
            dims(&shapes),
            vec![
                vec![1, 32, 3, 100],
                vec![1, 32, 3, 25],
                vec![1, 32, 3, 25],
                vec![1, 32, 3, 12],
                vec![1, 1024],
                vec![1, 6],
            ]
        );
        assert_eq!(shapes[3].flat_len(), 1152);
        assert_eq!(
            cfg.layers[3].conv().map(|p| (p.filter_cols, p.stride_cols)),
            Some((2, 2))
        );
    }

    #[test]
    fn v2_layers() {
        let cfg = preset("v2").unwrap();
        assert_eq!(cfg.layers.len(), 8);
        let third_dl = cfg.layers[4].conv().unwrap();
        assert_eq!(cfg.layers[4].tag(), "DL");
        assert_eq!(third_dl.out_channels, 64);
        assert_eq!((third_dl.dilation_rows, third_dl.dilation_cols), (1, 1));
        assert_eq!(cfg.layers[6].kind, LayerKind::Dense { units: 512 });
        let shapes = shape_check(&cfg).unwrap();
        assert_eq!(shapes[5].dims(), vec![1, 64, 3, 25]);
    }

    #[test]
    fn strided_layers_preserve_rows_in_presets() {
        for p in Preset::ALL {
            let cfg = p.config();
            let shapes = shape_check(&cfg).unwrap();
            let mut prev = LayerShape::Image(cfg.input_shape(1).unwrap());
            for (layer, shape) in cfg.layers.iter().zip(&shapes) {
                if let (LayerKind::Strided(_), LayerShape::Image(a), LayerShape::Image(b)) =
                    (&layer.kind, prev, shape)
                {
                    assert_eq!(a.rows, b.rows, "{p}");
                }
                prev = *shape;
            }
        }
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(preset("v3"), Err(Error::Config(_))));
    }

    #[test]
    fn infeasible_layer_names_its_index() {
        let mut cfg = preset("v1_split").unwrap();
        cfg.layers.insert(2, LayerSpec::strided(40, 32, 1));
        let err = shape_check(&cfg).unwrap_err().to_string();
        assert!(err.contains("layer 2"), "{err}");
    }

    #[test]
    fn final_layer_rules() {
        let mut cfg = preset("v2").unwrap();
        cfg.layers.last_mut().unwrap().activation = Activation::Relu;
        assert!(matches!(shape_check(&cfg), Err(Error::Config(_))));
        let mut cfg = preset("v2").unwrap();
        cfg.num_classes = 5;
        assert!(matches!(shape_check(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn layer_invariants() {
        let mut cfg = preset("v1_split").unwrap();
        if let LayerKind::Strided(p) = &mut cfg.layers[1].kind {
            p.filter_rows = 2;
        }
        assert!(matches!(shape_check(&cfg), Err(Error::Config(_))));
        let mut cfg = preset("v1_split").unwrap();
        if let LayerKind::Dilated(p) = &mut cfg.layers[0].kind {
            p.stride_cols = 2;
        }
        assert!(matches!(shape_check(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn digest_tracks_config() {
        let a = preset("v1_split").unwrap();
        assert_eq!(a.digest(), preset("v1_split").unwrap().digest());
        assert_ne!(a.digest(), preset("v1_individual").unwrap().digest());
        assert_eq!(a.digest_hex().len(), 64);
    }
}
