//! Text renderings of evaluation reports and run logs.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::train::RunLog;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReportFormat {
    #[default]
    PlainTable,
    Csv,
    JsonLines,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "plain" | "plain_table" | "table" => Ok(ReportFormat::PlainTable),
            "csv" => Ok(ReportFormat::Csv),
            "json_lines" | "jsonl" | "json" => Ok(ReportFormat::JsonLines),
            _ => Err(Error::config(format!(
                "unknown report format {s:?} (expected plain_table, csv or json_lines)"
            ))),
        }
    }
}

fn label<'a>(labels: &'a [String], k: usize) -> std::borrow::Cow<'a, str> {
    labels
        .get(k)
        .map(|s| s.as_str().into())
        .unwrap_or_else(|| format!("class {k}").into())
}

#[derive(Serialize)]
struct LabelledReport<'a> {
    labels: &'a [String],
    #[serde(flatten)]
    report: &'a EvalReport,
}

/// Per-class table in label order, followed by aggregate rows.
pub fn render_eval(report: &EvalReport, labels: &[String], format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::PlainTable => {
            let _ = writeln!(
                out,
                "{:<12} {:>9} {:>9} {:>9} {:>8}",
                "class", "precision", "recall", "f1", "support"
            );
            for (k, m) in report.per_class.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{:<12} {:>8.1}% {:>8.1}% {:>8.1}% {:>8}",
                    label(labels, k),
                    100.0 * m.precision,
                    100.0 * m.recall,
                    100.0 * m.f1,
                    m.support
                );
            }
            let _ = writeln!(
                out,
                "accuracy {:.2}%  macro F1 {:.2}%  macro recall {:.2}%  weighted F1 {:.2}%  (n = {})",
                100.0 * report.accuracy,
                100.0 * report.macro_f1,
                100.0 * report.macro_recall,
                100.0 * report.weighted_f1,
                report.total()
            );
        }
        ReportFormat::Csv => {
            out.push_str("class,precision,recall,f1,support\n");
            for (k, m) in report.per_class.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    label(labels, k),
                    m.precision,
                    m.recall,
                    m.f1,
                    m.support
                );
            }
            let total = report.total();
            let _ = writeln!(out, "accuracy,,,{},{total}", report.accuracy);
            let _ = writeln!(out, "macro avg,,{},{},{total}", report.macro_recall, report.macro_f1);
            let _ = writeln!(out, "weighted avg,,,{},{total}", report.weighted_f1);
        }
        ReportFormat::JsonLines => {
            out = serde_json::to_string(&LabelledReport { labels, report })
                .expect("report serializes");
            out.push('\n');
        }
    }
    out
}

/// Epoch-by-epoch summary. The plain table ends with the per-class table of
/// the selected epoch; csv has one row per epoch with per-class F1 and
/// recall columns; json lines is the persisted run log.
pub fn render_runlog(log: &RunLog, labels: &[String], format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::PlainTable => {
            let _ = writeln!(
                out,
                "{:>5} {:>11} {:>9} {:>9} {:>9} {:>8}",
                "epoch", "train_loss", "train_acc", "test_acc", "test_wF1", "seconds"
            );
            for r in &log.records {
                let (acc, wf1) = r.test.as_ref().map_or(("-".into(), "-".into()), |t| {
                    (
                        format!("{:.2}%", 100.0 * t.accuracy),
                        format!("{:.2}%", 100.0 * t.weighted_f1),
                    )
                });
                let _ = writeln!(
                    out,
                    "{:>5} {:>11.6} {:>8.2}% {:>9} {:>9} {:>8.1}",
                    r.epoch,
                    r.train_loss,
                    100.0 * r.train_accuracy,
                    acc,
                    wf1,
                    r.seconds
                );
            }
            if let Some(e) = log.selected_epoch() {
                let _ = writeln!(out, "\nselected epoch {e} ({:?})", log.selection);
                if let Some(test) = log.record(e).and_then(|r| r.test.as_ref()) {
                    out.push_str(&render_eval(test, labels, ReportFormat::PlainTable));
                }
            }
        }
        ReportFormat::Csv => {
            out.push_str("epoch,train_loss,train_accuracy,test_accuracy,test_weighted_f1,test_macro_f1");
            for metric in ["f1", "recall"] {
                for k in 0..labels.len() {
                    let _ = write!(out, ",{metric}_{}", label(labels, k).replace([' ', ','], "_"));
                }
            }
            out.push_str(",seconds\n");
            for r in &log.records {
                let _ = write!(out, "{},{},{}", r.epoch, r.train_loss, r.train_accuracy);
                match &r.test {
                    Some(t) => {
                        let _ = write!(out, ",{},{},{}", t.accuracy, t.weighted_f1, t.macro_f1);
                        for k in 0..labels.len() {
                            let v = t.per_class.get(k).map_or(0.0, |m| m.f1);
                            let _ = write!(out, ",{v}");
                        }
                        for k in 0..labels.len() {
                            let v = t.per_class.get(k).map_or(0.0, |m| m.recall);
                            let _ = write!(out, ",{v}");
                        }
                    }
                    None => out.push_str(&",".repeat(3 + 2 * labels.len())),
                }
                let _ = writeln!(out, ",{}", r.seconds);
            }
        }
        ReportFormat::JsonLines => out = log.to_jsonl(),
    }
    out
}
