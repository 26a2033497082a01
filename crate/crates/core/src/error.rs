use thiserror::Error;

/// Everything that can go wrong while ingesting, solving or checking.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("agent {agent} has a negative utility for good {good}")]
    NegativeUtility { agent: usize, good: usize },
    #[error("utilities are not bi-valued ({distinct} distinct values)")]
    NotBiValued { distinct: usize },
    #[error("instance has no agents")]
    EmptyAgentSet,
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("incomplete allocation: {0}")]
    IncompleteAllocation(String),
    #[error("allocation hands out divisible goods")]
    DivisiblePresent,
    #[error("enumeration needs {required} evaluations, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },
    #[error("matching is not maximum")]
    MatchingNotMaximum,
    #[error("agent {0} is already matched")]
    AgentAlreadyMatched(usize),
    #[error("no perfect matching exists")]
    NoPerfectMatching,
    #[error("expected {expected} agents, found {found}")]
    WrongAgentCount { expected: usize, found: usize },
    #[error("input allocation is not EF1: {0}")]
    NotEF1(String),
    #[error("{m} indivisible goods exceed {n} agents")]
    TooManyGoods { m: usize, n: usize },
    #[error("{m} indivisible goods outside the range ({n}, {max}]")]
    WrongRange { m: usize, n: usize, max: usize },
    #[error("the low value a is zero")]
    ZeroLowValue,
    #[error("price certificate failed: {0}")]
    CertificateFailed(String),
    #[error("internal invariant violated: {0}")]
    InvariantViolated(String),
}

/// Coarse grouping used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    BadInput,
    Precondition,
    Internal,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            NegativeUtility { .. } | EmptyAgentSet | Malformed(_) | IncompleteAllocation(_) => {
                ErrorCategory::BadInput
            }
            NotBiValued { .. }
            | DivisiblePresent
            | BudgetExceeded { .. }
            | WrongAgentCount { .. }
            | NotEF1(_)
            | TooManyGoods { .. }
            | WrongRange { .. }
            | ZeroLowValue
            | AgentAlreadyMatched(_) => ErrorCategory::Precondition,
            MatchingNotMaximum | NoPerfectMatching | CertificateFailed(_) | InvariantViolated(_) => {
                ErrorCategory::Internal
            }
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            ErrorCategory::BadInput => 2,
            ErrorCategory::Precondition => 3,
            ErrorCategory::Internal => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invariant(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvariantViolated(msg()))
    }
}
