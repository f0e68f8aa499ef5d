//! From raw accelerometer logs to labeled one-channel images.

mod cache;
mod segment;
mod wisdm;

pub use cache::{read_cache, read_cache_file, write_cache, write_cache_file, CACHE_MAGIC, CACHE_VERSION};
pub use segment::{
    normalize, segment, split, Normalization, Segment, SegmentSet, SegmentSpec, SplitMode,
};
pub use wisdm::{parse_wisdm, parse_wisdm_file, Activity, LabelScheme, ParseReport, Sample};

/// Channels per sample: x, y and z acceleration.
pub const VARIATES: usize = 3;
