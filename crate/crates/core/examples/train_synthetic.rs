//! Trains a narrow copy of the v1_split network on synthetic accelerometer
//! data, then saves and reloads the checkpoint.

use dilconv::data::{normalize, parse_wisdm, segment, split, LabelScheme, Normalization, SegmentSpec, SplitMode};
use dilconv::model::{load_checkpoint, save_checkpoint, Checkpoint, Preset};
use dilconv::optim::TrainConfig;
use dilconv::report::{render_runlog, ReportFormat};
use dilconv::synthetic::{synthetic_wisdm, SyntheticSpec};
use dilconv::train::{evaluate, train};

fn main() -> dilconv::Result<()> {
    env_logger::init();
    let scheme = LabelScheme::V1;
    let raw = synthetic_wisdm(&SyntheticSpec { run_length: 1200, ..SyntheticSpec::default() });
    let samples = parse_wisdm(raw.as_bytes(), scheme)?.samples;
    let spec = SegmentSpec {
        window: 100,
        step: 50,
        split: SplitMode::ByUser { train_users: vec![1, 2, 3, 4], test_users: vec![5, 6] },
        gap_threshold_ns: None,
    };
    let set = split(segment(&samples, &spec)?, &spec.split, 0, scheme.label_names())?;
    let set = normalize(set, Normalization::PerChannelStandardize);

    let cfg = Preset::V1Split.config().with_widths(8, 64);
    let tcfg = TrainConfig {
        learning_rate: 1e-3,
        batch_size: 32,
        epochs: 8,
        ..TrainConfig::default()
    };
    let (params, log) = train(&set, &cfg, &tcfg)?;
    print!("{}", render_runlog(&log, &set.label_names, ReportFormat::PlainTable));

    let path = std::env::temp_dir().join("dilconv-example.ckpt");
    save_checkpoint(&Checkpoint { config: cfg.clone(), label_names: set.label_names.clone(), params }, &path)?;
    let back = load_checkpoint(&path)?;
    let report = evaluate(&back.params, &back.config, &set.test)?;
    println!("reloaded {}: test accuracy {:.3}", path.display(), report.accuracy);
    Ok(())
}
