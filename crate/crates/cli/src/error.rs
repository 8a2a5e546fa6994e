// SPDX-License-Identifier: Apache-2.0

//! Command failures and their fixed exit codes.

use std::path::PathBuf;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_GENERATION: u8 = 3;
pub const EXIT_DRC: u8 = 4;
pub const EXIT_LVS: u8 = 5;
pub const EXIT_CHARACTERIZE: u8 = 6;
pub const EXIT_SCRIPT: u8 = 7;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("DRC found {count} violation(s); report: {}", report.display())]
    Drc { count: usize, report: PathBuf },
    #[error("LVS mismatch ({reason}); report: {}", report.display())]
    Lvs { reason: String, report: PathBuf },
    #[error("characterization failed: {0}")]
    Characterize(String),
    #[error("script line {line}: {message}")]
    Script { line: usize, message: String },
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Generation(_) | CliError::Io { .. } => EXIT_GENERATION,
            CliError::Drc { .. } => EXIT_DRC,
            CliError::Lvs { .. } => EXIT_LVS,
            CliError::Characterize(_) => EXIT_CHARACTERIZE,
            CliError::Script { .. } => EXIT_SCRIPT,
        }
    }

    pub(crate) fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub(crate) fn generation(e: impl std::fmt::Display) -> Self {
        CliError::Generation(e.to_string())
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
