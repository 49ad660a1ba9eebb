//! Incentivizing effort in effort-graph models.
//!
//! An agent splits a budget of effort over actions; actions feed concave
//! features; an evaluator scores features linearly. This crate decides which
//! effort profiles some evaluator can make optimal, builds such evaluators,
//! simulates the agent, and searches for the best incentivizable profile.

pub mod agent;
pub mod error;
pub mod incentive;
pub mod lp;
pub mod model;
pub mod optimizer;
pub mod rational;
pub mod scenarios;
pub mod simplex;

pub use agent::{best_response, brute_force_response, kkt_verify, KktReport};
pub use error::{Error, Result};
pub use incentive::{
    decide, feasible_designated, in_polytope, kappa_of_action, kappa_of_set, single_action_mechanism_lp, synthesize,
    Decision, DesignatedFeasibility, KappaCertificate, SynthesisResult,
};
pub use lp::{LinearProgram, LpSolution, LpStatus, RowSense};
pub use model::{
    feature_values, marginal_matrix, partials, utility, validate_graph, ConcaveFn, EffortGraph, EffortProfile, Family,
    Feature, Issue, LinearMechanism, Severity, ValidationReport,
};
pub use optimizer::{
    gadget_from_graph, incentivizable_supports, incentivizable_supports_exhaustive, independent_sets_bruteforce,
    optimize_profile, ConcaveObjective, DesignatedSet, Objective, OptimizationResult, SimpleGraph,
};
pub use rational::Rational;
