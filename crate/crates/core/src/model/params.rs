use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{shape_check, LayerKind, LayerShape, NetworkConfig};
use crate::error::Result;
use crate::optim::AdamState;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    /// `[filters, in_channels, filter_rows, filter_cols]` for conv layers,
    /// `[inputs, units]` for dense layers.
    pub weights: Tensor,
    pub bias: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<LayerParams>,
    /// Two entries per layer: weights, then bias.
    pub opt_state: Vec<AdamState>,
}

impl ModelParams {
    /// Weight and bias tensors in declaration order.
    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| [&l.weights, &l.bias])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.bias])
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().map(Tensor::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().all(Tensor::all_finite)
    }

    /// Fresh optimizer state, e.g. after loading from a checkpoint.
    pub fn reset_optimizer(&mut self) -> Result<()> {
        self.opt_state = self
            .tensors()
            .map(|t| AdamState::new(t.shape()))
            .collect::<Result<_>>()?;
        Ok(())
    }

    pub(crate) fn from_layers(layers: Vec<LayerParams>) -> Result<Self> {
        let mut p = Self {
            layers,
            opt_state: Vec::new(),
        };
        p.reset_optimizer()?;
        Ok(p)
    }
}

/// Weight tensor shapes per layer, derived from the shape table.
pub(crate) fn weight_shapes(cfg: &NetworkConfig) -> Result<Vec<(Vec<usize>, usize)>> {
    let shapes = shape_check(cfg)?;
    let mut prev = LayerShape::Image(cfg.input_shape(1)?);
    let mut out = Vec::with_capacity(cfg.layers.len());
    for (layer, shape) in cfg.layers.iter().zip(shapes) {
        let in_channels = match prev {
            LayerShape::Image(s) => s.channels,
            LayerShape::Flat { .. } => 0,
        };
        out.push(match &layer.kind {
            LayerKind::Dilated(p) | LayerKind::Strided(p) => (
                vec![p.out_channels, in_channels, p.filter_rows, p.filter_cols],
                p.out_channels,
            ),
            LayerKind::Dense { units } => (vec![prev.flat_len(), *units], *units),
        });
        prev = shape;
    }
    Ok(out)
}

/// He-uniform weights, `U(-a, a)` with `a = sqrt(6 / fan_in)`, and zero
/// biases. Tensors are filled in declaration order from one ChaCha8 stream.
pub fn init_params(cfg: &NetworkConfig, seed: u64) -> Result<ModelParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = weight_shapes(cfg)?
        .into_iter()
        .map(|(shape, units)| {
            let fan_in: usize = match shape[..] {
                [inputs, _] => inputs,
                _ => shape[1..].iter().product(),
            };
            let bound = (6.0 / fan_in as f64).sqrt();
            let n: usize = shape.iter().product();
            let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
            Ok(LayerParams {
                weights: Tensor::from_vec(&shape, data)?,
                bias: Tensor::zeros(&[units])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ModelParams::from_layers(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Preset;

    #[test]
    fn seeded_init_is_reproducible() {
        let cfg = Preset::V1Split.config();
        let a = init_params(&cfg, 11).unwrap();
        let b = init_params(&cfg, 11).unwrap();
        let c = init_params(&cfg, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.layers[0].weights, c.layers[0].weights);
        assert!(a.layers.iter().all(|l| l.bias.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn weight_shapes_follow_the_table() {
        let p = init_params(&Preset::V1Individual.config(), 0).unwrap();
        let shapes: Vec<_> = p.layers.iter().map(|l| l.weights.shape().to_vec()).collect();
        assert_eq!(
            shapes,
            vec![
                vec![32, 1, 3, 20],
                vec![32, 32, 1, 4],
                vec![32, 32, 3, 3],
                vec![32, 32, 1, 4],
                vec![1152, 1024],
                vec![1024, 6],
            ]
        );
        assert_eq!(p.opt_state.len(), 12);
    }

    #[test]
    fn empirical_spread_matches_uniform_law() {
        // the 1152x1024 dense layer of v1_split: fan_in 1152
        let p = init_params(&Preset::V1Split.config(), 3).unwrap();
        let w = p.layers[4].weights.data();
        let bound = (6.0f64 / 1152.0).sqrt();
        // sd of U(-a, a) is a / sqrt(3)
        let theory = bound / 3f64.sqrt();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let sd = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64).sqrt();
        assert!((sd - theory).abs() / theory < 0.10, "sd {sd} vs {theory}");
        assert!(w.iter().all(|v| v.abs() <= bound));

        // and on exactly 10k draws
        let small = crate::model::NetworkConfig {
            input: crate::model::InputShape { channels: 1, rows: 1, cols: 100 },
            layers: vec![crate::model::LayerSpec::dense(100, crate::model::Activation::None)],
            num_classes: 100,
        };
        let p = init_params(&small, 5).unwrap();
        let w = p.layers[0].weights.data();
        assert_eq!(w.len(), 10_000);
        let theory = (6.0f64 / 100.0).sqrt() / 3f64.sqrt();
        let sd = (w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64).sqrt();
        assert!((sd - theory).abs() / theory < 0.10);
    }
}
