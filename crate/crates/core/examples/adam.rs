//! Adam on an ill-conditioned quadratic, f(x, y) = x^2 + 100 y^2.

use dilconv::optim::{AdamState, TrainConfig};
use dilconv::Tensor;

fn main() -> dilconv::Result<()> {
    let cfg = TrainConfig { learning_rate: 0.1, ..TrainConfig::default() };
    let mut p = Tensor::from_vec(&[2], vec![3.0, -2.0])?;
    let mut state = AdamState::new(p.shape())?;
    for t in 1..=300 {
        let (x, y) = (p.data()[0], p.data()[1]);
        let grad = Tensor::from_vec(&[2], vec![2.0 * x, 200.0 * y])?;
        state.step(&mut p, &grad, &cfg)?;
        if t % 50 == 0 {
            let (x, y) = (p.data()[0], p.data()[1]);
            println!("step {t:>3}  x {x:>9.5}  y {y:>9.5}  f {:.3e}", x * x + 100.0 * y * y);
        }
    }
    Ok(())
}
