use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown key `{key}` in {context}")]
    UnknownKey { key: String, context: String },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("duplicate edge `{from}` -> `{to}`")]
    DuplicateEdge { from: String, to: String },
    #[error("duplicate evidence for node `{0}`")]
    DuplicateEvidence(String),
    #[error("probability out of range for {what}: {value}")]
    ProbabilityOutOfRange { what: String, value: f64 },
    #[error("cycle detected through node `{0}`")]
    Cycle(String),
    #[error("parent assignment for `{node}` is invalid: {reason}")]
    ParentAssignment { node: String, reason: String },
    #[error("assignment covers {got} nodes, network has {expected}")]
    IncompleteAssignment { expected: usize, got: usize },
    #[error("node `{0}` is not free (observed or clamped)")]
    NotFree(String),
    #[error("network failed validation: {0}")]
    Validation(String),
    #[error("invalid move proposal: {0}")]
    InvalidProposal(String),
    #[error("nonpositive weight in acceptance test: current {current}, proposed {proposed}")]
    NonpositiveWeight { current: f64, proposed: f64 },
    #[error("both values of `{0}` have zero weight")]
    DegenerateConditional(String),
    #[error("{count} free nodes exceed the exact-inference cap of {cap}")]
    CapExceeded { count: usize, cap: usize },
    #[error("evidence has zero probability under the network")]
    InconsistentEvidence,
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("estimates and truths disagree on node set: {0}")]
    NodeMismatch(String),
    #[error("truth unavailable: {0}")]
    TruthUnavailable(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Syntax(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
