//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by the algebra layer.
///
/// Parse- and validation-time problems are kept separate from mathematical
/// failures so that drivers can map them to distinct exit codes.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operands live over different groups")]
    GroupMismatch,

    #[error("operands live in different coefficient fields (orders {0} and {1})")]
    FieldMismatch(u32, u32),

    #[error("grading is not injective on the free part")]
    GradingNotInjective,

    #[error("invalid grading weights: {0}")]
    InvalidWeights(String),

    #[error("quotient map is not surjective onto Z/{0}")]
    NotSurjective(u32),

    #[error("quotient map is not well defined: torsion generator of order {order} maps to residue {residue} mod {modulus}")]
    IllDefinedQuotient { order: u32, residue: u32, modulus: u32 },

    #[error("cover operation requires the quotient to annihilate the torsion subgroup")]
    CoverAssumption,

    #[error("division by zero series")]
    ZeroSeries,

    #[error("zero has no inverse in the coefficient field")]
    ZeroCoefficient,

    #[error("truncation window O({available}) too small to certify a nonzero leading term")]
    TruncationTooSmall { available: String },

    #[error("leading slice is not a single monomial; project to a field summand first")]
    LeadingNotMonomial,

    #[error("series is not supported on strictly positive grades")]
    NotLambdaPlus,

    #[error("series is not a unit of the form 1 + (positive-grade terms)")]
    NotAUnit,

    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),

    #[error("generators `{0}` and `{1}` do not share a degree")]
    DegreeMismatch(String, String),

    #[error("boundary does not square to zero at degree {degree}, entry ({row}, {col}): {value}")]
    BoundarySquareNonzero { degree: i64, row: String, col: String, value: String },

    #[error("pivot <d{p}, {q}> = {pivot} is not of the form (-1)^mu + (positive-grade terms)")]
    PivotNotUnit { p: String, q: String, pivot: String },

    #[error("matrix is not invertible over the truncated ring")]
    NotInvertible,

    #[error("zeta function has a non-integer coefficient at {class}: {coeff}")]
    NonIntegerZeta { class: String, coeff: String },

    #[error("orbit class {class} is not divisible by the period {period}")]
    OrbitNotDivisible { class: String, period: u32 },

    #[error("orbit class {0} does not have positive grade")]
    OrbitNotPositive(String),

    #[error("flow-line count {0} is not an integer")]
    NonIntegerFlowCount(String),

    #[error("entry is not polynomial (carries a finite truncation)")]
    NotPolynomial,

    #[error("series does not descend to the subcover ring: {0}")]
    DescentFailed(String),

    #[error("birth data inconsistent with the current state: {0}")]
    BirthMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
