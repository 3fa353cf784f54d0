//! External surfaces: EDF/EDF+ parsing, the "EEGT" trial container,
//! dataset manifests, run configurations, CSV/JSON reports, and the `agtc`
//! command line that chains preprocess -> graph -> split -> train -> eval.

pub mod cli;
pub mod container;
pub mod edf;
pub mod formats;
pub mod manifest;
pub mod runconfig;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot access '{path}': {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("EDF parse error at byte {offset}: {detail}")]
    EdfParse { offset: usize, detail: String },
    #[error("bad trial container '{path}': {detail}")]
    ContainerParse { path: String, detail: String },
    #[error("bad manifest '{path}': {detail}")]
    ManifestParse { path: String, detail: String },
    #[error("config error on line {line}: {detail}")]
    Config { line: usize, detail: String },
    #[error("{0}")]
    Format(String),
}
