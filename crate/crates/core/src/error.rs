use thiserror::Error;

use crate::agent::KktReport;
use crate::incentive::KappaCertificate;
use crate::model::EffortProfile;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid effort graph: {}", .0.join("; "))]
    InvalidGraph(Vec<String>),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid effort profile: {0}")]
    InvalidProfile(String),

    #[error("invalid linear mechanism: {0}")]
    InvalidMechanism(String),

    #[error("profile spends {total} but the budget is {budget}")]
    BudgetViolation { total: f64, budget: f64 },

    #[error("action index {index} out of range (m = {len})")]
    ActionOutOfRange { index: usize, len: usize },

    #[error("{0} must be nonempty")]
    EmptySet(&'static str),

    #[error("profile is not incentivizable: kappa of its support is {}", crate::rational::format(&.0.kappa))]
    NotIncentivizable(Box<KappaCertificate>),

    #[error("degenerate synthesis: {0}")]
    DegenerateSynthesis(String),

    #[error("best response did not converge after {iterations} iterations (residual {})", .report.residual())]
    NonConvergence {
        iterations: usize,
        profile: Box<EffortProfile>,
        report: Box<KktReport>,
    },

    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("no action in the designated set has substitutability 1, so no profile supported inside it is incentivizable")]
    InfeasibleDesignatedSet,

    #[error("invalid simple graph: {0}")]
    InvalidSimpleGraph(String),

    #[error("linear program did not reach an optimum: {0}")]
    Lp(String),
}
