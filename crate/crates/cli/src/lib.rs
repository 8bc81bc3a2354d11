//! Pipeline orchestration behind the `demo-gauge` binary: manifest loading,
//! metric computation, clustering, success scoring, regression and report
//! emission.

pub mod commands;
pub mod manifest;
pub mod pipeline;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad manifest, configuration or inputs; exit code 2.
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] demo_gauge_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Core(_) => 2,
            CliError::Io { .. } => 1,
        }
    }
}

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Complete,
    /// Some demos, sets or outcomes could not be processed.
    Partial,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Complete => 0,
            Status::Partial => 3,
        }
    }

    pub fn and(self, other: Status) -> Status {
        if self == Status::Partial || other == Status::Partial {
            Status::Partial
        } else {
            Status::Complete
        }
    }
}
