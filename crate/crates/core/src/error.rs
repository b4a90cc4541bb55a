//! Error type shared by every module of the crate.

use thiserror::Error;

use crate::model::Violation;
use crate::tree::NodeId;

pub type Result<T> = std::result::Result<T, HmtError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HmtError {
    #[error("tree has no nodes")]
    EmptyTree,
    #[error("tree has more than one root (nodes {first} and {second} have no parent)")]
    MultipleRoots { first: NodeId, second: NodeId },
    #[error("parent links contain a cycle through node {node}")]
    CycleDetected { node: NodeId },
    #[error("node {node} names parent {parent}, which is out of range")]
    DanglingParent { node: NodeId, parent: usize },

    #[error("forest contains no trees")]
    EmptyForest,
    #[error("tree {tree} has {observations} observations for {nodes} nodes")]
    ObservationCountMismatch {
        tree: usize,
        nodes: usize,
        observations: usize,
    },
    #[error("observation kind mismatch: expected {expected}, found {found}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("symbol {symbol} is outside the emission alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },

    #[error("model is invalid: {}", format_violations(.0))]
    InvalidModel(Vec<Violation>),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no transition tensor for branching factor {branching} (needed at node {node})")]
    MissingTensorForBranchingFactor { node: NodeId, branching: usize },

    #[error("observations at node {node} have probability zero under the model")]
    ImpossibleObservation { node: NodeId },
    #[error("state {state} at node {node} has zero prior probability but non-zero posterior mass")]
    ZeroMarginalDivision { node: NodeId, state: usize },
    #[error("every hidden-state assignment has probability zero (first all-zero node {node})")]
    AllZeroLikelihood { node: NodeId },
    #[error("enumeration needs {required} assignments, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("non-finite parameter after update: {0}")]
    NonFiniteParameter(String),
    #[error("log-likelihood decreased at iteration {iteration}: {previous} -> {current}")]
    MonotonicityViolation {
        iteration: usize,
        previous: f64,
        current: f64,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("I/O error: {0}")]
    Io(String),
    #[error("format error: {0}")]
    Format(String),
}

impl HmtError {
    /// Stable variant name, printed by the command-line front end.
    pub fn name(&self) -> &'static str {
        match self {
            HmtError::EmptyTree => "EmptyTree",
            HmtError::MultipleRoots { .. } => "MultipleRoots",
            HmtError::CycleDetected { .. } => "CycleDetected",
            HmtError::DanglingParent { .. } => "DanglingParent",
            HmtError::EmptyForest => "EmptyForest",
            HmtError::ObservationCountMismatch { .. } => "ObservationCountMismatch",
            HmtError::KindMismatch { .. } => "KindMismatch",
            HmtError::SymbolOutOfRange { .. } => "SymbolOutOfRange",
            HmtError::InvalidModel(_) => "InvalidModel",
            HmtError::DimensionMismatch(_) => "DimensionMismatch",
            HmtError::MissingTensorForBranchingFactor { .. } => "MissingTensorForBranchingFactor",
            HmtError::ImpossibleObservation { .. } => "ImpossibleObservation",
            HmtError::ZeroMarginalDivision { .. } => "ZeroMarginalDivision",
            HmtError::AllZeroLikelihood { .. } => "AllZeroLikelihood",
            HmtError::BudgetExceeded { .. } => "BudgetExceeded",
            HmtError::DegenerateData(_) => "DegenerateData",
            HmtError::NonFiniteParameter(_) => "NonFiniteParameter",
            HmtError::MonotonicityViolation { .. } => "MonotonicityViolation",
            HmtError::InvalidConfig(_) => "InvalidConfig",
            HmtError::Io(_) => "Io",
            HmtError::Format(_) => "Format",
        }
    }
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl From<std::io::Error> for HmtError {
    fn from(e: std::io::Error) -> Self {
        HmtError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for HmtError {
    fn from(e: serde_json::Error) -> Self {
        HmtError::Format(e.to_string())
    }
}
