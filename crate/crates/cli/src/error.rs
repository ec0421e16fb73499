use std::fmt;
use std::path::Path;

use gaze_core::cascade::CascadeError;
use gaze_core::cnn::CnnError;
use gaze_core::dataset::DatasetError;
use gaze_core::evaluate::EvalError;
use gaze_core::imaging::PnmError;
use gaze_core::session::SessionError;

/// Unreadable or invalid input.
pub const EXIT_INPUT: i32 = 2;
/// A file that exists but does not parse.
pub const EXIT_FORMAT: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError { code: EXIT_INPUT, message: message.into() }
    }

    pub fn format(message: impl Into<String>) -> Self {
        CliError { code: EXIT_FORMAT, message: message.into() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::input(format!("{}: {e}", path.display()))
    }

    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        let code = match e {
            DatasetError::Parse { .. } | DatasetError::Image { .. } => EXIT_FORMAT,
            DatasetError::Argument(_) | DatasetError::Io { .. } => EXIT_INPUT,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<CnnError> for CliError {
    fn from(e: CnnError) -> Self {
        let code = match e {
            CnnError::Diverged { .. } => EXIT_DIVERGED,
            CnnError::BadMagic | CnnError::Checksum { .. } | CnnError::ShapeMismatch(_) | CnnError::Truncated => EXIT_FORMAT,
            _ => EXIT_INPUT,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<CascadeError> for CliError {
    fn from(e: CascadeError) -> Self {
        let code = match e {
            CascadeError::Argument(_) | CascadeError::Imaging(_) => EXIT_INPUT,
            _ => EXIT_FORMAT,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<PnmError> for CliError {
    fn from(e: PnmError) -> Self {
        let code = match e {
            PnmError::Io(_) => EXIT_INPUT,
            _ => EXIT_FORMAT,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Cnn(c) => c.into(),
            EvalError::Dataset(d) => d.into(),
            EvalError::Fold { fold, source } => CliError::from(*source).context(format!("fold {fold}")),
            other => CliError::input(other.to_string()),
        }
    }
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Decode { frame, source } => CliError::from(source).context(format!("frame {frame}")),
            SessionError::Cascade(c) => c.into(),
            SessionError::Cnn(c) => c.into(),
            other => CliError::input(other.to_string()),
        }
    }
}
