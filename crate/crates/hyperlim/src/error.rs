//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown variable `{name}` at offset {offset}")]
    UnknownVariable { name: String, offset: usize },

    #[error("division by the zero rational function")]
    ZeroDivision,

    #[error("element is indistinguishable from zero at precision {precision}")]
    IndistinguishableFromZero { precision: String },

    #[error("insufficient precision: {0}")]
    InsufficientPrecision(String),

    #[error("precision target not reachable within {steps} refinement steps")]
    UnreachablePrecision { steps: usize },

    #[error("elements belong to different hyperfield handles")]
    ElementsFromDifferentHandles,

    #[error("sum set cannot be enumerated for this carrier")]
    NotEnumerable,

    #[error("{0} is not a multiplicative subgroup: {1}")]
    TNotSubgroup(String, String),

    #[error("segment family is not increasing: {0}")]
    SegmentsNotIncreasing(String),

    #[error("no doubling stage exists: {0}")]
    DoublingUnavailable(String),

    #[error("undetermined within the stage budget: {0}")]
    Undetermined(String),

    #[error("tower does not satisfy the reconstruction hypothesis: {0}")]
    HypothesisMismatch(String),

    #[error("hyperfield is not stringent: witness {0}")]
    NotStringent(String),

    #[error("recovered coefficient structure is not a field: {0}")]
    FNotField(String),

    #[error("map is not surjective: no preimage found for {0}")]
    NotSurjective(String),

    #[error("Newton condition fails: {0}")]
    NewtonConditionFails(String),

    #[error("operands come from different coefficient sorts")]
    MixedSorts,

    #[error("precondition violated: {0}")]
    Precondition(String),
}
