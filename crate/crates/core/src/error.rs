use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the crate.
///
/// Variants split into two families: malformed input (parse and structural
/// problems) and numerical/domain failures. [`Error::is_domain`] tells them
/// apart, which the CLI maps onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("newick parse error at byte {pos}: {msg}")]
    Newick { pos: usize, msg: String },

    #[error("alignment parse error (line {line}): {msg}")]
    Alignment { line: usize, msg: String },

    #[error("duplicate leaf label `{0}`")]
    DuplicateLabel(String),

    #[error("negative branch length {0}")]
    NegativeLength(f64),

    #[error("tree needs at least {needed} leaves, got {got}")]
    TooFewLeaves { needed: usize, got: usize },

    #[error("label `{0}` is not part of the label universe")]
    UnknownLabel(String),

    #[error("split universes differ ({0} vs {1} leaves)")]
    UniverseMismatch(usize, usize),

    #[error("trees do not share a leaf set: {0}")]
    LeafSetMismatch(String),

    #[error("incompatible splits cannot coexist in one tree")]
    IncompatibleSplits,

    #[error("split set lacks a pendant split for leaf `{0}`")]
    MissingPendant(String),

    #[error("distance matrix error: {0}")]
    Matrix(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Jukes-Cantor distance saturated for pair ({0}, {1}): mismatch proportion {2:.4} >= 0.75")]
    Saturation(String, String, f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("bootstrap replicate {replicate} failed: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("estimate without `{label}` failed: {source}")]
    LeaveOneOut {
        label: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for numerical or domain failures (as opposed to bad input).
    pub fn is_domain(&self) -> bool {
        match self {
            Error::Saturation(..) | Error::Numerical(_) => true,
            Error::Replicate { source, .. } | Error::LeaveOneOut { source, .. } => {
                source.is_domain()
            }
            _ => false,
        }
    }

    pub(crate) fn newick(pos: usize, msg: impl Into<String>) -> Self {
        Error::Newick {
            pos,
            msg: msg.into(),
        }
    }

    pub(crate) fn alignment(line: usize, msg: impl Into<String>) -> Self {
        Error::Alignment {
            line,
            msg: msg.into(),
        }
    }
}
