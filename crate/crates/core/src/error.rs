use thiserror::Error;

use crate::semantic::AttributeTuple;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EcoError {
    #[error("attribute tuple ({}, {}) out of range 1..=100", .0.id, .0.value)]
    TupleOutOfRange(AttributeTuple),

    #[error("semantic description is empty")]
    EmptyDescription,

    #[error("duplicate attribute id {0} in semantic description")]
    DuplicateId(u8),

    #[error("description has {0} tuples, agents need between 3 and 6")]
    AgentDescriptionSize(usize),

    #[error("user request has no parts")]
    EmptyRequest,

    #[error("input width mismatch: expected {expected}, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("degenerate training set: SVM training needs at least one example of each class")]
    SingleClass,

    #[error("recognizer has not been trained")]
    Untrained,

    #[error("cannot evolve an empty request or sequence")]
    EmptyFitnessInput,

    #[error("agent pool is empty, population cannot be seeded")]
    EmptyPool,

    #[error("initial degree {degree} must be smaller than the number of users {users}")]
    DegreeTooLarge { degree: usize, users: usize },

    #[error("network needs at least 2 habitats, got {0}")]
    TooFewHabitats(usize),

    #[error("agent {0} is already deployed")]
    DuplicateDeployment(u32),

    #[error("agent {0} is not hosted at this habitat")]
    UnknownAgent(u32),

    #[error("unknown habitat {0}")]
    UnknownHabitat(usize),

    #[error("window [{start}, {end}) is empty or outside the series of length {len}")]
    BadWindow { start: usize, end: usize, len: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("filter map parse error on line {line}: {msg}")]
    FilterMap { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl EcoError {
    /// Message without the category prefix.
    pub fn detail(&self) -> String {
        match self {
            EcoError::Config(m) | EcoError::Io(m) => m.clone(),
            other => other.to_string(),
        }
    }

    /// Configuration problems, as opposed to failures while running.
    pub fn is_config(&self) -> bool {
        matches!(self, EcoError::Config(_) | EcoError::FilterMap { .. } | EcoError::DegreeTooLarge { .. } | EcoError::TooFewHabitats(_))
    }
}

impl From<std::io::Error> for EcoError {
    fn from(e: std::io::Error) -> Self {
        EcoError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, EcoError>;
