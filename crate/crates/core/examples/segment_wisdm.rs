//! Parses a WISDM raw file and cuts it into labelled windows.
//!
//!     cargo run --example segment_wisdm -- WISDM_ar_v1.1_raw.txt 100
//!
//! Without a path, a synthetic log is used.

use dilconv::data::{parse_wisdm, parse_wisdm_file, segment, split, LabelScheme, SegmentSpec, SplitMode};
use dilconv::synthetic::{synthetic_wisdm, SyntheticSpec};

fn main() -> dilconv::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next();
    let window: usize = args.next().and_then(|w| w.parse().ok()).unwrap_or(100);
    let scheme = LabelScheme::V1;
    let parsed = match &path {
        Some(p) => parse_wisdm_file(p.as_ref(), scheme)?,
        None => parse_wisdm(synthetic_wisdm(&SyntheticSpec::default()).as_bytes(), scheme)?,
    };
    println!("{} samples, {} records skipped", parsed.samples.len(), parsed.skipped);

    let spec = SegmentSpec {
        window,
        step: window,
        split: SplitMode::RandomFraction { train_frac: 0.8 },
        gap_threshold_ns: None,
    };
    let segments = segment(&parsed.samples, &spec)?;
    let mut per_class = [0usize; 6];
    for s in &segments {
        per_class[s.label] += 1;
    }
    for (name, n) in scheme.names().iter().zip(per_class) {
        println!("{name:<12} {n}");
    }
    let set = split(segments, &spec.split, 0, scheme.label_names())?;
    println!("train {}  test {}  (window {window}, {} variates)", set.train.len(), set.test.len(), set.variates);
    Ok(())
}
