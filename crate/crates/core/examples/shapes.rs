//! Layer-by-layer output shapes of the built-in presets, or of one preset
//! given on the command line.
//!
//!     cargo run --example shapes -- v2

use dilconv::cli::shape_table;
use dilconv::model::Preset;

fn main() -> dilconv::Result<()> {
    let presets: Vec<Preset> = match std::env::args().nth(1) {
        Some(name) => vec![name.parse()?],
        None => Preset::ALL.to_vec(),
    };
    for p in presets {
        let cfg = p.config();
        let params: usize = dilconv::model::init_params(&cfg, 0)?.num_parameters();
        println!("{p} ({params} parameters)\n{}", shape_table(&cfg)?);
    }
    Ok(())
}
