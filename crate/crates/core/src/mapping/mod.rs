//! Per-robot belief map: log-odds occupancy, intensity-based dust filtering,
//! frontier extraction and accuracy evaluation against ground truth.

mod accuracy;
mod export;
mod filter;
mod map;

pub use accuracy::{map_accuracy, AccuracyReport};
pub use export::{
    parse_map_ascii, read_snapshot, write_map_ascii, write_snapshot, MAP_ASCII_MAGIC, SNAPSHOT_MAGIC,
    SNAPSHOT_VERSION,
};
pub use filter::filter_scan;
pub use map::{CellState, MapParams, OccupancyMap, ScanUpdate};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("invalid map parameters: {0}")]
    Params(String),
    #[error("map has no occupied voxels to evaluate")]
    EmptyReport,
    #[error("frame mismatch: {0}")]
    FrameMismatch(String),
    #[error("malformed map data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
