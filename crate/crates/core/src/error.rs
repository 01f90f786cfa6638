use alloc::boxed::Box;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("mixture has no atoms")]
    EmptyMixture,
    #[error("negative weight {weight} at index {index}")]
    NegativeWeight { index: usize, weight: f64 },
    #[error("weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("non-finite value in {what} at index {index}")]
    NonFiniteData { what: &'static str, index: usize },
    #[error("noise standard deviation at index {index} must be finite and positive, got {value}")]
    InvalidSigma { index: usize, value: f64 },
    #[error("sample is empty")]
    EmptySample,
    #[error("invalid parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("operation needs a continuous prior, but the smoothing scale c is 0")]
    ZeroSmoothing,
    #[error("fitted atom {atom} is not a point of the supplied grid")]
    GridMismatch { atom: f64 },
    #[error("Monte Carlo budget {got} too small, need at least {required}")]
    BudgetTooSmall { required: usize, got: usize },
    #[error("neighborhood radius {eta} must be below 1/2")]
    EtaTooLarge { eta: f64 },
    #[error("sample of size {n} too small: DKW radius {eta} is not below 1/2")]
    SampleTooSmall { n: usize, eta: f64 },
    #[error("cross-validation folds are degenerate: {folds} folds for {n} observations")]
    DegenerateFolds { folds: usize, n: usize },
    #[error("smoothing grid needs at least 3 strictly decreasing points, got {len}")]
    GridTooCoarse { len: usize },
    #[error("sample of size {n} is too small to split (need at least 4)")]
    SplitTooSmall { n: usize },
    #[error("numerical failure: {0}")]
    Numerics(&'static str),
    #[error("replication {rep}: {source}")]
    Replication { rep: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn at_rep(self, rep: usize) -> Self {
        Error::Replication { rep, source: Box::new(self) }
    }
}
