use crate::coupling::DesignStatus;
use crate::rational::{format_rational, Rational};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{} is outside the function domain", format_rational(.x))]
    OutOfDomain { x: Rational },

    #[error("malformed step function: {0}")]
    MalformedStepFn(String),

    #[error("invalid producer {id}: {reason}")]
    InvalidProducer { id: String, reason: String },

    #[error("invalid demand curve: {0}")]
    InvalidDemand(String),

    #[error("ask of producer {producer} is inadmissible: {reason}")]
    InadmissibleAsk { producer: usize, reason: String },

    #[error("loss-of-load cost {} does not exceed the highest ask {}", format_rational(.p_lolc), format_rational(.max_ask))]
    LossOfLoadTooLow { p_lolc: Box<Rational>, max_ask: Box<Rational> },

    #[error("allowance bid of producer {producer} is inadmissible: {reason}")]
    InadmissibleBid { producer: usize, reason: String },

    #[error("middle segment of producer {producer} exceeds its allowance cap")]
    InadmissibleMiddle { producer: usize },

    #[error("expected {expected} entries (one per producer), got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("inconsistent clearing: {0}")]
    InternalInconsistency(String),

    #[error("market design is not valid: {0}")]
    DesignInvalid(DesignStatus),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("candidate profile is not a verified effective Nash equilibrium")]
    CandidateNotVerified,
}
