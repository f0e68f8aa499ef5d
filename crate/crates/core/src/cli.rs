//! The `dilconv` command line: `prepare`, `train`, `evaluate` and `shapes`.
//!
//! Exit codes: 0 on success, 2 for user or configuration errors (including
//! missing files and checkpoint/data mismatches), 3 when training diverges.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::data::{
    normalize, parse_wisdm_file, read_cache_file, segment, split, write_cache_file, SegmentSet,
};
use crate::error::{Error, Result};
use crate::manifest::{ResolvedRun, RunManifest};
use crate::metrics::EvalReport;
use crate::model::{
    load_checkpoint, save_checkpoint, shape_check, Checkpoint, LayerShape, NetworkConfig, Preset,
};
use crate::report::{render_eval, render_runlog, ReportFormat};
use crate::train::{evaluate, train};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dilconv", version, about = "Dilated-CNN time-series classifier")]
pub struct Cli {
    /// Run manifest (flat TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// v1_individual, v1_split or v2.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Output directory for the cache, checkpoint and run log.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// plain_table, csv or json_lines.
    #[arg(long, global = true, default_value = "plain_table")]
    pub format: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, segment and split a raw WISDM file into a segment cache.
    Prepare,
    /// Train per the manifest; writes a checkpoint and a run log.
    Train,
    /// Evaluate a checkpoint on the test split of a segment cache.
    Evaluate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Print the layer-by-layer output shapes of a network.
    Shapes,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USER } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Divergence { .. } => EXIT_DIVERGED,
                _ => EXIT_USER,
            }
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let format: ReportFormat = cli.format.parse()?;
    match &cli.command {
        Command::Shapes => cmd_shapes(cli, out),
        Command::Prepare => {
            let run = resolve(cli)?;
            cmd_prepare(&run, out).map(|_| ())
        }
        Command::Train => {
            let run = resolve(cli)?;
            cmd_train(&run, format, out)
        }
        Command::Evaluate { checkpoint, cache } => {
            let run = cli.config.as_ref().map(|_| resolve(cli)).transpose()?;
            let checkpoint = checkpoint
                .clone()
                .or_else(|| run.as_ref().map(ResolvedRun::checkpoint_path))
                .ok_or_else(|| Error::config("evaluate needs --checkpoint or --config"))?;
            let cache = cache
                .clone()
                .or_else(|| run.as_ref().map(|r| r.cache_path.clone()))
                .ok_or_else(|| Error::config("evaluate needs --cache or --config"))?;
            let normalization = run.as_ref().map(|r| r.normalize).unwrap_or_default();
            let (report, labels) = cmd_evaluate(&checkpoint, &cache, normalization)?;
            write_out(out, &render_eval(&report, &labels, format))
        }
    }
}

fn resolve(cli: &Cli) -> Result<ResolvedRun> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::config("this command needs --config <manifest>"))?;
    let mut manifest = RunManifest::load(path)?;
    if let Some(seed) = cli.seed {
        manifest.seed = Some(seed);
    }
    if let Some(epochs) = cli.epochs {
        manifest.epochs = Some(epochs);
    }
    if let Some(preset) = &cli.preset {
        manifest.preset = Some(preset.clone());
        manifest.layers = None;
    }
    if let Some(dir) = &cli.out {
        manifest.out_dir = Some(dir.clone());
        if manifest.cache.is_none() {
            manifest.cache = Some(dir.join("segments.bin"));
        }
    }
    manifest.resolve()
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Counts printed by `prepare`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrepareSummary {
    pub samples: usize,
    pub skipped: usize,
    pub segments: usize,
    pub train: usize,
    pub test: usize,
}

/// Parse → segment → split, in memory.
pub fn build_segment_set(run: &ResolvedRun) -> Result<(SegmentSet, PrepareSummary)> {
    let path = run
        .dataset_path
        .as_ref()
        .ok_or_else(|| Error::config("manifest has no dataset_path"))?;
    let parsed = parse_wisdm_file(path, run.scheme)?;
    if let Some(line) = parsed.first_skipped_line {
        log::warn!(
            "{}: skipped {} malformed records (first on line {line})",
            path.display(),
            parsed.skipped
        );
    }
    let segments = segment(&parsed.samples, &run.segment)?;
    let n_segments = segments.len();
    let set = split(
        segments,
        &run.segment.split,
        run.train.seed,
        run.scheme.label_names(),
    )?;
    let summary = PrepareSummary {
        samples: parsed.samples.len(),
        skipped: parsed.skipped,
        segments: n_segments,
        train: set.train.len(),
        test: set.test.len(),
    };
    Ok((set, summary))
}

pub fn cmd_prepare(run: &ResolvedRun, out: &mut dyn Write) -> Result<PrepareSummary> {
    let (set, summary) = build_segment_set(run)?;
    if let Some(parent) = run.cache_path.parent() {
        create_dir(parent)?;
    }
    write_cache_file(&set, &run.cache_path)?;
    let mut text = format!(
        "samples {}  skipped {}  segments {}\ntrain {}  test {}\n",
        summary.samples, summary.skipped, summary.segments, summary.train, summary.test
    );
    if let Some((train, test)) = run.kind.reference_counts() {
        let dev = |got: usize, want: usize| 100.0 * (got as f64 - want as f64) / want as f64;
        text += &format!(
            "reference train {train} ({:+.2}%)  test {test} ({:+.2}%)\n",
            dev(summary.train, train),
            dev(summary.test, test)
        );
    }
    text += &format!("cache {}\n", run.cache_path.display());
    write_out(out, &text)?;
    Ok(summary)
}

fn check_compatible(config: &NetworkConfig, labels: &[String], set: &SegmentSet) -> Result<()> {
    if config.input.rows != set.variates || config.input.cols != set.window {
        return Err(Error::DigestMismatch(format!(
            "network expects {}x{} images, data has {}x{}",
            config.input.rows, config.input.cols, set.variates, set.window
        )));
    }
    if labels != set.label_names {
        return Err(Error::DigestMismatch(format!(
            "network labels {labels:?} differ from data labels {:?}",
            set.label_names
        )));
    }
    Ok(())
}

pub fn cmd_train(run: &ResolvedRun, format: ReportFormat, out: &mut dyn Write) -> Result<()> {
    let set = if run.cache_path.exists() {
        read_cache_file(&run.cache_path)?
    } else {
        let (set, _) = build_segment_set(run)?;
        if let Some(parent) = run.cache_path.parent() {
            create_dir(parent)?;
        }
        write_cache_file(&set, &run.cache_path)?;
        set
    };
    check_compatible(&run.network, &run.scheme.label_names(), &set)?;
    let set = normalize(set, run.normalize);
    let (params, log) = train(&set, &run.network, &run.train)?;
    create_dir(&run.out_dir)?;
    let ckpt = Checkpoint {
        config: run.network.clone(),
        label_names: set.label_names.clone(),
        params,
    };
    save_checkpoint(&ckpt, &run.checkpoint_path())?;
    let log_path = run.runlog_path();
    std::fs::write(&log_path, log.to_jsonl()).map_err(|e| Error::io(&log_path, e))?;
    let text = match format {
        ReportFormat::PlainTable => render_runlog(&log, &set.label_names, format),
        _ => log
            .selected_epoch()
            .and_then(|e| log.record(e))
            .and_then(|r| r.test.as_ref())
            .map(|t| render_eval(t, &set.label_names, format))
            .unwrap_or_default(),
    };
    write_out(out, &text)
}

pub fn cmd_evaluate(
    checkpoint: &Path,
    cache: &Path,
    normalization: crate::data::Normalization,
) -> Result<(EvalReport, Vec<String>)> {
    let ckpt = load_checkpoint(checkpoint)?;
    let set = read_cache_file(cache)?;
    check_compatible(&ckpt.config, &ckpt.label_names, &set)?;
    let set = normalize(set, normalization);
    let report = evaluate(&ckpt.params, &ckpt.config, &set.test)?;
    Ok((report, set.label_names))
}

/// One row per layer: index, description, output shape.
pub fn shape_table(cfg: &NetworkConfig) -> Result<String> {
    let shapes = shape_check(cfg)?;
    let mut text = format!(
        "{:>3}  {:<48} {}\n  -  {:<48} [1,{},{},{}]\n",
        "#", "layer", "output", "input", cfg.input.channels, cfg.input.rows, cfg.input.cols
    );
    let mut prev = LayerShape::Image(cfg.input_shape(1)?);
    for (i, (layer, shape)) in cfg.layers.iter().zip(&shapes).enumerate() {
        if let (LayerShape::Image(_), LayerShape::Flat { .. }) = (prev, shape) {
            text += &format!("  -  {:<48} {}\n", "flatten", prev.flat_len());
        }
        text += &format!("{i:>3}  {:<48} {shape}\n", layer.to_string());
        prev = *shape;
    }
    Ok(text)
}

fn cmd_shapes(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let configs: Vec<(String, NetworkConfig)> = match (&cli.preset, &cli.config) {
        (Some(name), _) => {
            let p: Preset = name.parse()?;
            vec![(p.name().to_string(), p.config())]
        }
        (None, Some(_)) => vec![("manifest".to_string(), resolve(cli)?.network)],
        (None, None) => Preset::ALL
            .iter()
            .map(|p| (p.name().to_string(), p.config()))
            .collect(),
    };
    let mut text = String::new();
    for (name, cfg) in configs {
        text += &format!("== {name}\n{}\n", shape_table(&cfg)?);
    }
    write_out(out, &text)
}
