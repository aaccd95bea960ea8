use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Caller passed inconsistent shapes, ranges or flags.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("training error{}: {msg}", layer.map(|l| format!(" in layer {l}")).unwrap_or_default())]
    Training { layer: Option<usize>, msg: String },

    /// Sampling from an empty replay buffer; callers may retry after more data arrives.
    #[error("retryable training error: {0}")]
    Retryable(String),

    #[error("guidance error: {0}")]
    Guidance(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("schema mismatch: checkpoint schema id {checkpoint}, task schema id {task}")]
    SchemaMismatch { checkpoint: u32, task: u32 },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("experiment error: {0}")]
    Experiment(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

pub(crate) fn check_dim(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Usage(format!(
            "{what}: expected dimension {expected}, got {got}"
        )));
    }
    Ok(())
}
