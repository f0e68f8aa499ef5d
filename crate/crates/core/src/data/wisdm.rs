//! Reader for the WISDM raw accelerometer format:
//! `user,activity,timestamp,x,y,z;` records, normally one per line.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activity {
    Walking,
    Jogging,
    Upstairs,
    Downstairs,
    Stairs,
    Sitting,
    Standing,
    LyingDown,
}

impl FromStr for Activity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Ok(match key.as_str() {
            "walking" => Activity::Walking,
            "jogging" => Activity::Jogging,
            "upstairs" => Activity::Upstairs,
            "downstairs" => Activity::Downstairs,
            "stairs" => Activity::Stairs,
            "sitting" => Activity::Sitting,
            "standing" => Activity::Standing,
            "lyingdown" => Activity::LyingDown,
            _ => return Err(Error::format(format!("unknown activity {s:?}"))),
        })
    }
}

/// Class layout of a dataset release.
///
/// `V1` keeps the two stair directions apart; `V2` merges them into a single
/// stairs class and adds lying down.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelScheme {
    V1,
    V2,
}

impl LabelScheme {
    pub fn names(self) -> &'static [&'static str] {
        match self {
            LabelScheme::V1 => &[
                "Walking",
                "Jogging",
                "Upstairs",
                "Downstairs",
                "Sitting",
                "Standing",
            ],
            LabelScheme::V2 => &[
                "Walking",
                "Jogging",
                "Stairs",
                "Sitting",
                "Standing",
                "Lying Down",
            ],
        }
    }

    pub fn label_names(self) -> Vec<String> {
        self.names().iter().map(|s| s.to_string()).collect()
    }

    pub fn class_of(self, activity: Activity) -> Option<usize> {
        use Activity::*;
        match (self, activity) {
            (_, Walking) => Some(0),
            (_, Jogging) => Some(1),
            (LabelScheme::V1, Upstairs) => Some(2),
            (LabelScheme::V1, Downstairs) => Some(3),
            (LabelScheme::V1, Sitting) => Some(4),
            (LabelScheme::V1, Standing) => Some(5),
            (LabelScheme::V1, Stairs | LyingDown) => None,
            (LabelScheme::V2, Upstairs | Downstairs | Stairs) => Some(2),
            (LabelScheme::V2, Sitting) => Some(3),
            (LabelScheme::V2, Standing) => Some(4),
            (LabelScheme::V2, LyingDown) => Some(5),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub user_id: u32,
    /// Class index under the scheme the file was parsed with.
    pub activity: usize,
    pub timestamp: i64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParseReport {
    pub samples: Vec<Sample>,
    /// Records dropped for a wrong field count, an empty or non-numeric
    /// field, a non-finite value or an activity outside the scheme.
    pub skipped: usize,
    /// 1-based line of the first skipped record, for diagnostics.
    pub first_skipped_line: Option<usize>,
}

fn parse_record(record: &str, scheme: LabelScheme) -> Option<Sample> {
    let fields: Vec<&str> = record.split(',').map(str::trim).collect();
    let [user, activity, timestamp, x, y, z] = fields[..] else {
        return None;
    };
    let finite = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite());
    Some(Sample {
        user_id: user.parse().ok()?,
        activity: scheme.class_of(activity.parse().ok()?)?,
        timestamp: timestamp.parse().ok()?,
        x: finite(x)?,
        y: finite(y)?,
        z: finite(z)?,
    })
}

/// Parses a WISDM raw stream. Records are separated by `;` or newlines, so
/// lines carrying several records and records missing their semicolon are
/// both accepted. Malformed records are skipped and counted.
pub fn parse_wisdm<R: Read>(reader: R, scheme: LabelScheme) -> Result<ParseReport> {
    parse_inner(reader, scheme).map_err(|e| Error::io("<stream>", e))?
}

pub fn parse_wisdm_file(path: &Path, scheme: LabelScheme) -> Result<ParseReport> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_inner(file, scheme)
        .map_err(|e| Error::io(path, e))?
        .map_err(|e| match e {
            Error::Format(msg) => Error::format(format!("{}: {msg}", path.display())),
            other => other,
        })
}

fn parse_inner<R: Read>(
    reader: R,
    scheme: LabelScheme,
) -> std::io::Result<Result<ParseReport>> {
    let mut reader = BufReader::new(reader);
    let mut report = ParseReport::default();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = String::from_utf8_lossy(&buf);
        for record in line.split(';').map(str::trim).filter(|r| !r.is_empty()) {
            match parse_record(record, scheme) {
                Some(s) => report.samples.push(s),
                None => {
                    report.skipped += 1;
                    report.first_skipped_line.get_or_insert(line_no);
                }
            }
        }
    }
    if report.samples.is_empty() {
        return Ok(Err(Error::format(format!(
            "no valid WISDM records ({} skipped)",
            report.skipped
        ))));
    }
    Ok(Ok(report))
}
