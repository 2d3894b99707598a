use crate::model::AreaId;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the estimation pipeline.
///
/// [`Error::is_validation`] separates problems with the statistical content of
/// the inputs (improper posterior, inconsistent area sizes, transform domain)
/// from plain argument misuse.
#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum Error {
    #[error(
        "rank_deficient: the stacked sample covariate matrix has rank {rank} < p = {p}; \
         the posterior is proper only when X has full column rank"
    )]
    RankDeficient { rank: usize, p: usize },

    #[error("too few sample units: n = {n} but at least p + 1 = {} are required", p + 1)]
    InsufficientSample { n: usize, p: usize },

    #[error("area {area}: census count {census} plus sample size {sample} differs from N_d = {size}")]
    AreaSizeMismatch {
        area: AreaId,
        census: u64,
        sample: usize,
        size: u64,
    },

    #[error("area {area} is present in the sample but missing from the census frame")]
    AreaMissingFromCensus { area: AreaId },

    #[error("non-positive {what} {value} at row {row}")]
    NonPositiveWeight {
        what: &'static str,
        row: usize,
        value: f64,
    },

    #[error("welfare {welfare} at row {row} plus shift {shift} is not positive")]
    TransformDomain { row: usize, welfare: f64, shift: f64 },

    #[error("row {row} has {found} covariates, expected {expected}")]
    CovariateLength {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("Q(rho) is not positive definite at rho = {rho}")]
    SingularGridPoint { rho: f64 },

    #[error("every grid point was rejected")]
    EmptyGrid,

    #[error("{draws} draws are too few for level {level}")]
    InsufficientDraws { draws: usize, level: f64 },

    #[error("coefficient of variation undefined for non-positive mean {mean}")]
    UndefinedCv { mean: f64 },

    #[error("area {area}: subsample size {size} exceeds N_d = {population}")]
    SubsampleTooLarge {
        area: AreaId,
        size: usize,
        population: u64,
    },

    #[error("empty sample for area {area}")]
    EmptyArea { area: AreaId },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{source_name}: line {line}: {message}")]
    Schema {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by the data rather than by the caller's arguments.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::InvalidArgument(_) | Error::Schema { .. } | Error::Io(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
