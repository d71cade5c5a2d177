use thiserror::Error;

/// Errors raised by the net, distribution, matrix, graph and update layers.
///
/// [`Error::code`] yields the bare variant name, which is what the HTTP
/// service reports in error bodies.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown transition `{0}`")]
    UnknownTransition(String),
    #[error("unknown place `{0}`")]
    UnknownPlace(String),
    #[error("marking has {got} entries but the net has {expected} places")]
    MarkingLengthMismatch { expected: usize, got: usize },
    #[error("invalid net: {0}")]
    InvalidNet(String),
    #[error("conditioning event has probability zero")]
    ImpossibleCondition,
    #[error("observation has probability zero under the current belief")]
    ImpossibleObservation,
    #[error("negative assert needs a non-empty place set")]
    EmptyPlaceSet,
    #[error("dense distribution over {0} places exceeds the supported maximum")]
    DenseTooLarge(usize),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("matrix of type {inputs}->{outputs} exceeds the arity cap")]
    SizeOverflow { inputs: usize, outputs: usize },
    #[error("invalid arity: {0}")]
    InvalidArity(String),
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid causality graph: {0}")]
    InvalidGraph(String),
    #[error("node set is not closed with respect to paths")]
    NotPathClosed,
    #[error("unknown node {0}")]
    UnknownNode(u32),
    #[error("evaluation frontier of {0} wires exceeds the cap")]
    FrontierOverflow(usize),
    #[error("invalid modular Bayesian network: {0}")]
    InvalidMbn(String),
    #[error("unknown output port {0}")]
    UnknownOutput(usize),
    #[error("split size {k} invalid for a matrix with {outputs} outputs")]
    InvalidK { k: usize, outputs: usize },
    #[error("node {0} is not a direct predecessor of node {1}")]
    NotPredecessor(u32, u32),
    #[error("network is not an ordinary Bayesian network: {0}")]
    NotObn(String),
    #[error("node {0} is connected to an output port")]
    NodeHasOutput(u32),
    #[error("node {0} carries a sub-stochastic matrix")]
    NodeNotStochastic(u32),
    #[error("invalid update strategy: {0}")]
    InvalidStrategy(String),
    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    /// Variant name, used as the machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnknownTransition(_) => "UnknownTransition",
            Error::UnknownPlace(_) => "UnknownPlace",
            Error::MarkingLengthMismatch { .. } => "MarkingLengthMismatch",
            Error::InvalidNet(_) => "InvalidNet",
            Error::ImpossibleCondition => "ImpossibleCondition",
            Error::ImpossibleObservation => "ImpossibleObservation",
            Error::EmptyPlaceSet => "EmptyPlaceSet",
            Error::DenseTooLarge(_) => "DenseTooLarge",
            Error::InvalidDistribution(_) => "InvalidDistribution",
            Error::TypeMismatch(_) => "TypeMismatch",
            Error::SizeOverflow { .. } => "SizeOverflow",
            Error::InvalidArity(_) => "InvalidArity",
            Error::InvalidMatrix(_) => "InvalidMatrix",
            Error::InvalidGraph(_) => "InvalidGraph",
            Error::NotPathClosed => "NotPathClosed",
            Error::UnknownNode(_) => "UnknownNode",
            Error::FrontierOverflow(_) => "FrontierOverflow",
            Error::InvalidMbn(_) => "InvalidMbn",
            Error::UnknownOutput(_) => "UnknownOutput",
            Error::InvalidK { .. } => "InvalidK",
            Error::NotPredecessor(..) => "NotPredecessor",
            Error::NotObn(_) => "NotObn",
            Error::NodeHasOutput(_) => "NodeHasOutput",
            Error::NodeNotStochastic(_) => "NodeNotStochastic",
            Error::InvalidStrategy(_) => "InvalidStrategy",
            Error::Parse(_) => "Parse",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
