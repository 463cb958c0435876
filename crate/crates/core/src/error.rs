use thiserror::Error;

use crate::dag::EdgeId;

/// Rejected parameter derivations and constructor arguments.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("horizon n = {horizon} is too short: {condition} requires n >= {required:.3}")]
    HorizonTooShort {
        condition: &'static str,
        required: f64,
        horizon: u64,
    },
    #[error("query budget m = {budget} must exceed 2 ln(1/delta) = {minimum:.4}")]
    BudgetTooSmall { budget: f64, minimum: f64 },
    #[error("epsilon = {epsilon:.6} exceeds 1/K = {limit:.6}")]
    EpsilonTooLarge { epsilon: f64, limit: f64 },
    #[error("graph has a single source-to-sink path; there is nothing to learn")]
    SinglePath,
    #[error("graph paths must all have the same length (got lengths {shortest}..={longest})")]
    NotUniformLength { shortest: usize, longest: usize },
    #[error("invalid parameter {name} = {value}: {reason}")]
    Invalid {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

/// Feedback that does not match what the learner's model allows.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeedbackError {
    #[error("loss {value} on edge {edge} is outside [0, 1]")]
    LossOutOfRange { edge: EdgeId, value: f64 },
    #[error("path loss {value} is outside [0, {max}]")]
    PathLossOutOfRange { value: f64, max: f64 },
    #[error("loss supplied for edge {0}, which is not on the chosen path")]
    PathMismatch(EdgeId),
    #[error("no loss supplied for chosen edge {0}")]
    MissingEdgeLoss(EdgeId),
    #[error("the round was queried but no losses were supplied")]
    LossesMissingOnQuery,
    #[error("losses supplied on a round that was not queried")]
    LossesPresentWithoutQuery,
}

pub(crate) fn check_unit(name: &'static str, value: f64, lo_open: bool) -> Result<(), ParamError> {
    let ok = value.is_finite() && value <= 1.0 && if lo_open { value > 0.0 } else { value >= 0.0 };
    if ok {
        Ok(())
    } else {
        Err(ParamError::Invalid {
            name,
            value,
            reason: if lo_open { "must lie in (0, 1]" } else { "must lie in [0, 1]" },
        })
    }
}
