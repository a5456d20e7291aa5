use thiserror::Error;

use crate::mdp::{ActionId, StateId};

/// Map-file and grid-construction failures.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid map: {0}")]
    Semantic(String),
}

impl MapError {
    pub(crate) fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        MapError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    pub(crate) fn semantic(message: impl Into<String>) -> Self {
        MapError::Semantic(message.into())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Map(#[from] MapError),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unknown state {0}")]
    UnknownState(StateId),

    #[error("unknown action `{0}`")]
    UnknownAction(String),

    #[error("action {action} is not enabled in state {state}")]
    ActionNotEnabled { state: StateId, action: ActionId },

    #[error("state {0} has no enabled actions")]
    NoEnabledActions(StateId),

    #[error("value iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("route extraction failed at state {state}: {reason}")]
    Route { state: StateId, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state {0} is not a critical state")]
    NotCritical(StateId),

    #[error("state {0} is not on the route")]
    NotOnRoute(StateId),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
