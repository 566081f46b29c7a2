//! Error types shared across the crate.

use alloc::string::String;
use core::fmt;

/// Errors raised while building or validating a scenario tree.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessError {
    /// Structural schema violation (duplicate ids, missing parents,
    /// wrong value dimension, bad depth index).
    Malformed(String),
    /// A well-formed node list that does not describe a valid tree
    /// (orphans, probability sums off by more than the input tolerance,
    /// internal nodes without children).
    InvalidTree(String),
    /// A branch with zero or negative conditional probability.
    ZeroProbBranch(String),
    /// Time index outside the admissible range for an operation.
    OutOfRange(String),
}

impl fmt::Display for ProcessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessError::Malformed(m) => write!(f, "malformed input: {m}"),
            ProcessError::InvalidTree(m) => write!(f, "invalid tree: {m}"),
            ProcessError::ZeroProbBranch(m) => write!(f, "zero-probability branch: {m}"),
            ProcessError::OutOfRange(m) => write!(f, "out of range: {m}"),
        }
    }
}

/// Errors raised when evaluating a cost function.
#[derive(Debug, Clone, PartialEq)]
pub enum CostError {
    MissingCostEntry(String),
    NonFiniteEntry(String),
}

impl fmt::Display for CostError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostError::MissingCostEntry(m) => write!(f, "missing cost entry: {m}"),
            CostError::NonFiniteEntry(m) => write!(f, "non-finite cost entry: {m}"),
        }
    }
}

/// Errors raised while constructing couplings.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingError {
    NegativeMass(String),
    BadTotalMass(String),
    ArityMismatch(String),
}

impl fmt::Display for CouplingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CouplingError::NegativeMass(m) => write!(f, "negative mass: {m}"),
            CouplingError::BadTotalMass(m) => write!(f, "total mass not one: {m}"),
            CouplingError::ArityMismatch(m) => write!(f, "arity mismatch: {m}"),
        }
    }
}

/// Errors raised by the LP engine.
#[derive(Debug, Clone, PartialEq)]
pub enum LpError {
    /// Cycling guard exceeded or ill-conditioned basis.
    NumericalFailure(String),
    /// Inconsistent problem dimensions or non-finite data.
    BadProblem(String),
}

impl fmt::Display for LpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpError::NumericalFailure(m) => write!(f, "numerical failure: {m}"),
            LpError::BadProblem(m) => write!(f, "bad problem: {m}"),
        }
    }
}

/// Errors raised by the adapted-transport solvers and their consumers.
#[derive(Debug, Clone, PartialEq)]
pub enum SolveError {
    HorizonMismatch(String),
    MissingCostEntry(String),
    MarginalMismatch(String),
    NumericalFailure(String),
    /// The extracted structured dual failed post-verification; this
    /// signals an accuracy problem in the LP engine.
    DualVerificationFailed(String),
    Infeasible(String),
    BadInput(String),
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::HorizonMismatch(m) => write!(f, "horizon mismatch: {m}"),
            SolveError::MissingCostEntry(m) => write!(f, "missing cost entry: {m}"),
            SolveError::MarginalMismatch(m) => write!(f, "marginal mismatch: {m}"),
            SolveError::NumericalFailure(m) => write!(f, "numerical failure: {m}"),
            SolveError::DualVerificationFailed(m) => {
                write!(f, "dual verification failed: {m}")
            }
            SolveError::Infeasible(m) => write!(f, "infeasible: {m}"),
            SolveError::BadInput(m) => write!(f, "bad input: {m}"),
        }
    }
}

impl From<LpError> for SolveError {
    fn from(e: LpError) -> Self {
        SolveError::NumericalFailure(alloc::format!("{e}"))
    }
}

impl From<CostError> for SolveError {
    fn from(e: CostError) -> Self {
        match e {
            CostError::MissingCostEntry(m) => SolveError::MissingCostEntry(m),
            CostError::NonFiniteEntry(m) => SolveError::BadInput(m),
        }
    }
}

/// Errors raised by the polar-set analysis.
#[derive(Debug, Clone, PartialEq)]
pub enum PolarError {
    /// `polar_certificate` called on an event with positive maximal mass.
    NotPolar(String),
    /// Structural verification failed despite the event being polar.
    CertificateFailed(String),
    Solve(SolveError),
}

impl fmt::Display for PolarError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolarError::NotPolar(m) => write!(f, "event is not polar: {m}"),
            PolarError::CertificateFailed(m) => write!(f, "certificate failed: {m}"),
            PolarError::Solve(e) => write!(f, "{e}"),
        }
    }
}

impl From<SolveError> for PolarError {
    fn from(e: SolveError) -> Self {
        PolarError::Solve(e)
    }
}

/// Errors raised by the hedging module.
#[derive(Debug, Clone, PartialEq)]
pub enum HedgeError {
    NotMartingaleMarginal(String),
    /// A node's increments do not span the required martingale increment
    /// and the least-squares residual exceeds the gate.
    IncompleteMarket(String),
    BadPayoff(String),
    Solve(SolveError),
}

impl fmt::Display for HedgeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HedgeError::NotMartingaleMarginal(m) => {
                write!(f, "marginal is not a martingale: {m}")
            }
            HedgeError::IncompleteMarket(m) => write!(f, "incomplete market: {m}"),
            HedgeError::BadPayoff(m) => write!(f, "bad payoff: {m}"),
            HedgeError::Solve(e) => write!(f, "{e}"),
        }
    }
}

impl From<SolveError> for HedgeError {
    fn from(e: SolveError) -> Self {
        HedgeError::Solve(e)
    }
}

/// Errors raised by the barycenter module.
#[derive(Debug, Clone, PartialEq)]
pub enum BarycenterError {
    EmptySupport(String),
    Solve(SolveError),
}

impl fmt::Display for BarycenterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BarycenterError::EmptySupport(m) => write!(f, "empty candidate support: {m}"),
            BarycenterError::Solve(e) => write!(f, "{e}"),
        }
    }
}

impl From<SolveError> for BarycenterError {
    fn from(e: SolveError) -> Self {
        BarycenterError::Solve(e)
    }
}
