use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("form is not positive definite (leading minor {0} is not positive)")]
    NotPositiveDefinite(usize),

    #[error("form is not primitive (coefficient gcd {0})")]
    NotPrimitive(i64),

    #[error("only even numbers of variables are supported, got m = {0}")]
    OddDimension(usize),

    #[error("vector has length {got}, form has {expected} variables")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("prime {p} is on the wrong branch: {what}")]
    WrongBranch { p: u64, what: &'static str },

    #[error("p-adic precision too low at p = {p} (working exponent {k})")]
    PrecisionTooLow { p: u64, k: u32 },

    #[error("density did not collapse to a rational: {0}")]
    NonRationalResult(String),

    #[error("condition not satisfied: {0}")]
    ConditionNotSatisfied(String),

    #[error("form is not of level one (level = {0})")]
    NotLevelOne(u64),

    #[error("unsupported number of variables m = {0} for this operation")]
    UnsupportedM(usize),

    #[error("assumption on nu_p(|A|) violated at p = {0}")]
    AssumptionViolated(u64),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("degenerate design matrix in least-squares fit")]
    DegenerateDesignMatrix,

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
