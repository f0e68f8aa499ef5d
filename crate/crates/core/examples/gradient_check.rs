//! Compares backprop gradients of a small network with central differences.

use dilconv::model::{init_params, loss_and_gradients, Activation, InputShape, LayerSpec, NetworkConfig};
use dilconv::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> dilconv::Result<()> {
    let cfg = NetworkConfig {
        input: InputShape { channels: 1, rows: 3, cols: 12 },
        layers: vec![
            LayerSpec::dilated((3, 3), 3, (1, 2)),
            LayerSpec::strided(2, 3, 2),
            LayerSpec::dense(8, Activation::Relu),
            LayerSpec::dense(6, Activation::None),
        ],
        num_classes: 6,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = Tensor::from_vec(&[2, 1, 3, 12], (0..72).map(|_| rng.random_range(-2.0..2.0)).collect())?;
    let labels = [1, 4];
    let lambda = 1e-3;
    let params = init_params(&cfg, 7)?;
    let (loss, _, grads) = loss_and_gradients(&params, &cfg, &x, &labels, lambda)?;
    println!("loss {loss:.6}");

    let h = 1e-5;
    for (li, g) in grads.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for i in 0..g.weights.len() {
            let mut probe = params.clone();
            probe.layers[li].weights.data_mut()[i] += h;
            let up = loss_and_gradients(&probe, &cfg, &x, &labels, lambda)?.0;
            probe.layers[li].weights.data_mut()[i] -= 2.0 * h;
            let down = loss_and_gradients(&probe, &cfg, &x, &labels, lambda)?.0;
            let numeric = (up - down) / (2.0 * h);
            let analytic = g.weights.data()[i];
            worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6));
        }
        println!("layer {li} {}: {} weights, max relative error {worst:.2e}", cfg.layers[li], g.weights.len());
    }
    Ok(())
}
