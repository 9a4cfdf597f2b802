use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Pipeline stage an error originated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Split,
    Standardize,
    Screen,
    Select,
    Clean,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Split => "split",
            Stage::Standardize => "standardize",
            Stage::Screen => "screen",
            Stage::Select => "select",
            Stage::Clean => "clean",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("column {0} is constant (zero sample variance)")]
    ConstantColumn(usize),

    #[error("too few rows: need at least {needed}, got {found}")]
    TooFewRows { needed: usize, found: usize },

    #[error("singular Gram matrix (smallest eigenvalue of X'X/n is {min_eigenvalue:.3e})")]
    SingularGram { min_eigenvalue: f64 },

    #[error("model of size {size} is too large for {n} rows")]
    ModelTooLarge { size: usize, n: usize },

    #[error("zero residual variance (perfect fit); t-statistics are undefined")]
    ZeroResidualVariance,

    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:.3e})")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("too many subsets to enumerate ({count})")]
    TooManySubsets { count: u128 },

    #[error("coordinate descent did not converge after {sweeps} sweeps (KKT residual {kkt_residual:.3e})")]
    NoConvergence { sweeps: usize, kkt_residual: f64 },

    #[error("screening path is empty")]
    EmptyPath,

    #[error("screened model is empty")]
    EmptyModel,

    #[error("all pilot coefficients are zero")]
    EmptyPilot,

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{stage} stage: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Innermost error, with stage attribution stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for errors caused by bad input data or configuration, as opposed
    /// to numerical failures inside a solver.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self.root(),
            Error::DimensionMismatch(_)
                | Error::InvalidArgument(_)
                | Error::ConstantColumn(_)
                | Error::TooFewRows { .. }
                | Error::MissingColumn(_)
                | Error::Parse(_)
                | Error::Io(_)
                | Error::DomainError(_)
        )
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
