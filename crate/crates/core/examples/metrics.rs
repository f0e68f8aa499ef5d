//! Confusion-matrix metrics in the three report formats.

use dilconv::data::LabelScheme;
use dilconv::metrics::EvalReport;
use dilconv::report::{render_eval, ReportFormat};

fn main() -> dilconv::Result<()> {
    let truth = [0, 0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 5];
    let predicted = [0, 0, 1, 1, 1, 3, 2, 3, 2, 4, 4, 5, 4, 5];
    let report = EvalReport::from_predictions(&truth, &predicted, 6)?;
    let labels = LabelScheme::V1.label_names();
    for format in [ReportFormat::PlainTable, ReportFormat::Csv, ReportFormat::JsonLines] {
        println!("-- {format:?}\n{}", render_eval(&report, &labels, format));
    }
    Ok(())
}
