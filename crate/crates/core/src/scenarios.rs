//! Canonical small effort graphs used throughout tests, benches and fixtures.

use crate::model::{ConcaveFn, EffortGraph, Feature, LinearMechanism};
use crate::rational::{int, Rational};

fn build(actions: &[&str], features: Vec<Feature>, weights: &[&[i64]], budget: Rational) -> EffortGraph {
    let weights = weights.iter().map(|row| row.iter().map(|&w| int(w)).collect()).collect();
    EffortGraph::new(actions.iter().map(|s| s.to_string()).collect(), features, weights, budget)
        .expect("canonical scenario is valid")
}

/// Cheat / study / copy feeding test and homework scores. Studying is the
/// weaker route to each score individually (2 versus 3) yet incentivizable.
pub fn classroom() -> EffortGraph {
    classroom_with(2)
}

/// Classroom graph where studying converts at rate 1, so
/// `1/3 + 1/3 < 1` and studying can be substituted away.
pub fn classroom_weak() -> EffortGraph {
    classroom_with(1)
}

fn classroom_with(study: i64) -> EffortGraph {
    let f = ConcaveFn::identity();
    build(
        &["cheat", "study", "copy"],
        vec![Feature::new("T", f), Feature::new("W", f)],
        &[&[3, 0], &[study, study], &[0, 3]],
        int(1),
    )
}

/// Four actions, three features: 1 -> F1 (1), 2 -> F2 (2), 3 -> F2 and F3 (1 each),
/// 4 -> F3 (2), with `f1 = f2 = 1 - e^-y`, `f3 = 1 - e^-2y` and `B = 1`.
pub fn nonconvex() -> EffortGraph {
    nonconvex_with(2)
}

/// [`nonconvex`] with the edge 2 -> F2 removed, making action 2 inert.
pub fn nonconvex_a22zero() -> EffortGraph {
    nonconvex_with(0)
}

fn nonconvex_with(a22: i64) -> EffortGraph {
    let f12 = ConcaveFn::expsat(1.0, 1.0);
    let f3 = ConcaveFn::expsat(1.0, 2.0);
    build(
        &["1", "2", "3", "4"],
        vec![Feature::new("1", f12), Feature::new("2", f12), Feature::new("3", f3)],
        &[&[1, 0, 0], &[0, a22, 0], &[0, 1, 1], &[0, 0, 2]],
        int(1),
    )
}

/// `(1, e^{1/3}/2, e/4)`, which makes `(1/3, 0, 2/3, 0)` optimal on [`nonconvex`].
pub fn nonconvex_beta() -> LinearMechanism {
    LinearMechanism::new(vec![1.0, (1.0f64 / 3.0).exp() / 2.0, std::f64::consts::E / 4.0]).unwrap()
}

/// `(1, e^{-1/3}/2, 1/4)`, which makes `(2/3, 0, 1/3, 0)` optimal on [`nonconvex`].
pub fn nonconvex_beta_prime() -> LinearMechanism {
    LinearMechanism::new(vec![1.0, (-1.0f64 / 3.0).exp() / 2.0, 0.25]).unwrap()
}

/// Midpoint of [`nonconvex_beta`] and [`nonconvex_beta_prime`].
pub fn nonconvex_beta_midpoint() -> LinearMechanism {
    let a = nonconvex_beta();
    let b = nonconvex_beta_prime();
    LinearMechanism::new(a.weights().iter().zip(b.weights()).map(|(x, y)| (x + y) / 2.0).collect()).unwrap()
}
