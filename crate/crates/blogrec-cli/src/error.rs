use blogrec::corpus::CorpusError;
use blogrec::eval::EvalError;
use blogrec::fm::FmError;
use blogrec::knn::KnnError;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Knn(#[from] KnnError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Fm(#[from] FmError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// Configuration mistakes map to 2, bad or insufficient data to 3,
    /// and a diverged training run to 4 so scripts can retune and retry.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Corpus(_) => EXIT_DATA,
            CliError::Knn(err) => match err {
                KnnError::InvalidK { .. }
                | KnnError::InvalidAlpha { .. }
                | KnnError::EmptyGrid => EXIT_USAGE,
                _ => EXIT_DATA,
            },
            CliError::Eval(err) => match err {
                EvalError::InvalidConfig(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            },
            CliError::Fm(err) => match err {
                FmError::InvalidConfig(_) => EXIT_USAGE,
                FmError::Diverged { .. } => EXIT_DIVERGED,
                _ => EXIT_DATA,
            },
            CliError::Io { .. } => EXIT_DATA,
        }
    }
}

/// Attaches the touched path to an I/O error so the message names the file.
pub fn io_ctx(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}
