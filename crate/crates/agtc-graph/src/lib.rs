//! Static, undirected, binary EEG channel adjacency graphs built from
//! 10-20-system electrode labels: channels connect to their nearest present
//! neighbor along the scalp's front-to-back rows and side-to-side columns.

mod adjacency;
mod label;
pub mod montages;

pub use adjacency::{build_adjacency, degree_histogram, AdjacencyGraph, DegreeHistogram};
pub use label::{parse_label, ElectrodeLabel, Row};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("cannot parse electrode label '{label}': {reason}")]
    Parse { label: String, reason: String },
    #[error("duplicate electrode label '{label}'")]
    DuplicateLabel { label: String },
    #[error("labels '{a}' and '{b}' occupy the same grid position")]
    PositionCollision { a: String, b: String },
}
