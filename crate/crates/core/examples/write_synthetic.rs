//! Writes a synthetic WISDM-format log, for trying the CLI without the real
//! dataset.
//!
//!     cargo run --example write_synthetic -- crates/core/data/toy.txt [v1|v2]

use dilconv::data::LabelScheme;
use dilconv::synthetic::{synthetic_wisdm, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "toy.txt".into());
    let scheme = match args.next().as_deref() {
        Some("v2") => LabelScheme::V2,
        _ => LabelScheme::V1,
    };
    let text = synthetic_wisdm(&SyntheticSpec { run_length: 1200, scheme, ..SyntheticSpec::default() });
    if let Some(dir) = std::path::Path::new(&path).parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&path, &text)?;
    println!("wrote {} lines to {path}", text.lines().count());
    Ok(())
}
