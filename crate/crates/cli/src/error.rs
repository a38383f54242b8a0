use std::fmt;
use std::process::ExitCode;

use bteach_core::dataset::synth::SynthError;
use bteach_core::dataset::{BundleError, ManifestError, ProbMapFileError};
use bteach_core::pipeline::{ExplainError, ThetaFileError};
use bteach_core::study::SessionError;
use bteach_core::{TeachingError, TrainError};
use bteach_service::MaterialsError;

/// Failure classes, one per exit status.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    NoTeachingSet(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Validation(_) => 2,
            CliError::NoTeachingSet(_) => 3,
            CliError::Io(_) => 4,
        })
    }

    /// Prefixes the message with the file it concerns.
    pub fn context(self, path: &std::path::Path) -> Self {
        let p = path.display();
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{p}: {m}")),
            CliError::NoTeachingSet(m) => CliError::NoTeachingSet(format!("{p}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{p}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::NoTeachingSet(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

fn validation(e: impl fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn io(e: impl fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        io(e)
    }
}

impl From<ProbMapFileError> for CliError {
    fn from(e: ProbMapFileError) -> Self {
        match e {
            ProbMapFileError::Io(_) => io(e),
            _ => validation(e),
        }
    }
}

impl From<ManifestError> for CliError {
    fn from(e: ManifestError) -> Self {
        match e {
            ManifestError::MissingFile { .. } | ManifestError::Io(_) => io(e),
            ManifestError::ProbMap {
                source: ProbMapFileError::Io(_),
                ..
            } => io(e),
            _ => validation(e),
        }
    }
}

impl From<ThetaFileError> for CliError {
    fn from(e: ThetaFileError) -> Self {
        match e {
            ThetaFileError::Io(_) => io(e),
            ThetaFileError::Schema(_) => validation(e),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidParams(_) => validation(e),
            _ => io(e),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        validation(e)
    }
}

impl From<TeachingError> for CliError {
    fn from(e: TeachingError) -> Self {
        match e {
            TeachingError::NoTeachingSetFound { .. } => CliError::NoTeachingSet(e.to_string()),
            _ => validation(e),
        }
    }
}

impl From<BundleError> for CliError {
    fn from(e: BundleError) -> Self {
        match e {
            BundleError::Io(_) | BundleError::Image { .. } => io(e),
            _ => validation(e),
        }
    }
}

impl From<ExplainError> for CliError {
    fn from(e: ExplainError) -> Self {
        match e {
            ExplainError::Teaching(e) => e.into(),
            ExplainError::Bundle(e) => e.into(),
        }
    }
}

impl From<MaterialsError> for CliError {
    fn from(e: MaterialsError) -> Self {
        match e {
            MaterialsError::Explain { source, .. } => source.into(),
            MaterialsError::Bundle { source, .. } => source.into(),
            MaterialsError::Unannotated(_) => validation(e),
        }
    }
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Storage(_) => io(e),
            _ => validation(e),
        }
    }
}
