use thiserror::Error;

pub type Result<T> = std::result::Result<T, MmsError>;

#[derive(Debug, Error)]
pub enum MmsError {
    #[error("invalid instance: {}", .0.join("; "))]
    InvalidInstance(Vec<String>),

    #[error("invalid generator config: {0}")]
    Config(String),

    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },

    #[error("size guard: {0}")]
    Guard(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("linear program {0}")]
    Lp(String),

    #[error("unknown solver `{0}`")]
    UnknownSolver(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MmsError {
    pub(crate) fn parse(line: Option<usize>, message: impl Into<String>) -> Self {
        MmsError::Parse {
            line,
            message: message.into(),
        }
    }
}
