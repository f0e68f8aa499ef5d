//! How dilation widens the receptive field without adding weights.
//!
//! A 1x3 all-ones filter over 1..=9 sums three neighbours at dilation 1 and
//! three samples two apart at dilation 2.

use dilconv::ops::{conv2d_forward, ConvParams, Padding};
use dilconv::Tensor;

fn main() -> dilconv::Result<()> {
    let x = Tensor::from_vec(&[1, 1, 1, 9], (1..=9).map(f64::from).collect())?;
    let w = Tensor::new(&[1, 1, 1, 3], 1.0)?;
    let b = Tensor::zeros(&[1])?;
    println!("input      {:?}", x.data());
    for dilation in [1, 2, 3] {
        for padding in [Padding::Valid, Padding::Same] {
            let p = ConvParams {
                padding,
                ..ConvParams::dilated((1, 3), 1, (1, dilation))
            };
            let span = p.effective_cols();
            match conv2d_forward(&x, &w, &b, &p) {
                Ok(y) => println!("d={dilation} span={span} {padding:?}: {:?}", y.data()),
                Err(e) => println!("d={dilation} span={span} {padding:?}: {e}"),
            }
        }
    }
    Ok(())
}
