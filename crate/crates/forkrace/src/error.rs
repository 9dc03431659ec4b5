use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("hash powers sum to {sum}, expected 1")]
    Normalization { sum: f64 },
    #[error("{name} = {value} is out of range")]
    Range { name: String, value: f64 },
    #[error("{name} has {got} entries, expected {expected}")]
    Arity {
        name: String,
        got: usize,
        expected: usize,
    },
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("no sign change of revenue minus hash power in ({lo}, {hi})")]
    NoCrossing { lo: f64, hi: f64 },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("state space exceeds {limit} states")]
    Capacity { limit: usize },
    #[error("illegal action {action} in state {state}")]
    IllegalAction { state: String, action: String },
    #[error("no convergence after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("observation has zero probability under the current belief")]
    ImpossibleObservation,
    #[error("missing MDP values for the requested configuration")]
    MissingValues,
    #[error("wall-clock budget of {ms} ms exceeded")]
    BudgetExceeded { ms: u64 },
    #[error("degenerate model: {0}")]
    DegenerateModel(String),
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn range(name: &str, value: f64) -> Error {
    Error::Range {
        name: name.to_string(),
        value,
    }
}
