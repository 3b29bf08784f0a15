use std::fmt;

use lmstego::analysis::AnalysisError;
use lmstego::{CodecError, LmError, NgramError};

/// Process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Usage = 2,
    Data = 3,
    Backend = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn new(exit: Exit, error: impl Into<anyhow::Error>) -> Self {
        Self {
            exit,
            error: error.into(),
        }
    }

    pub fn usage(msg: impl fmt::Display) -> Self {
        Self::new(Exit::Usage, anyhow::anyhow!("{msg}"))
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Self::new(Exit::Data, anyhow::anyhow!("{msg}"))
    }

    pub fn context(self, msg: impl fmt::Display + Send + Sync + 'static) -> Self {
        Self {
            exit: self.exit,
            error: self.error.context(msg),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

fn lm_exit(e: &LmError) -> Exit {
    match e {
        LmError::Backend(_) | LmError::Io(_) => Exit::Backend,
        _ => Exit::Data,
    }
}

impl From<LmError> for CliError {
    fn from(e: LmError) -> Self {
        Self::new(lm_exit(&e), e)
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        let exit = match &e {
            CodecError::Lm(lm) => lm_exit(lm),
            CodecError::InvalidConfig(_)
            | CodecError::Partition(_)
            | CodecError::MissingLength
            | CodecError::EmptyKey => Exit::Usage,
            CodecError::Truncated { .. } => {
                return Self::new(Exit::Data, e).context(
                    "parameter mismatch suspected: check --algo, --k, --delta, --divergence, \
                     --partition-seed, --seed-text, the length mode and the model",
                )
            }
            _ => Exit::Data,
        };
        Self::new(exit, e)
    }
}

impl From<NgramError> for CliError {
    fn from(e: NgramError) -> Self {
        match e {
            NgramError::BadOrder | NgramError::BadAlpha(_) => Self::new(Exit::Usage, e),
            _ => Self::new(Exit::Data, e),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Lm(lm) => lm.into(),
            AnalysisError::Codec(c) => c.into(),
            AnalysisError::InvalidSpec(_) | AnalysisError::Partition(_) => {
                Self::new(Exit::Usage, e)
            }
            _ => Self::new(Exit::Data, e),
        }
    }
}

impl From<lmstego::bits::BitsError> for CliError {
    fn from(e: lmstego::bits::BitsError) -> Self {
        Self::new(Exit::Data, e)
    }
}
