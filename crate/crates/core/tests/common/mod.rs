#![allow(dead_code)]

use incentix::rational::{ratio, Rational};
use incentix::{ConcaveFn, EffortGraph, Family, Feature, LinearMechanism};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Positive rational with denominator at most `max_den`, at most `max_value`.
pub fn positive_rational(rng: &mut ChaCha8Rng, max_den: i64, max_value: i64) -> Rational {
    let den = rng.gen_range(1..=max_den);
    let num = rng.gen_range(1..=max_value * den);
    ratio(num, den)
}

pub fn concave_fn(rng: &mut ChaCha8Rng, family: Family) -> ConcaveFn {
    let c = rng.gen_range(0.5..2.0);
    match family {
        Family::Linear => ConcaveFn::linear(c),
        Family::ExpSat => ConcaveFn::expsat(c, rng.gen_range(0.5..2.0)),
        Family::Log1p => ConcaveFn::log1p(c, rng.gen_range(0.5..2.0)),
        Family::SqrtShift => ConcaveFn::sqrtshift(c, rng.gen_range(0.1..2.0)),
    }
}

pub fn any_concave_fn(rng: &mut ChaCha8Rng) -> ConcaveFn {
    let family = Family::ALL[rng.gen_range(0..Family::ALL.len())];
    concave_fn(rng, family)
}

/// Random graph with `m` actions, `n` features, each edge present with
/// probability `density`, and every action feeding at least one feature.
pub fn graph(rng: &mut ChaCha8Rng, m: usize, n: usize, density: f64, budget: Rational) -> EffortGraph {
    let mut weights = vec![vec![ratio(0, 1); n]; m];
    for row in weights.iter_mut() {
        for w in row.iter_mut() {
            if rng.gen_bool(density) {
                *w = positive_rational(rng, 10, 3);
            }
        }
        if row.iter().all(|w| *w == ratio(0, 1)) {
            let i = rng.gen_range(0..n);
            row[i] = positive_rational(rng, 10, 3);
        }
    }
    let features = (0..n).map(|i| Feature::new(format!("F{i}"), any_concave_fn(rng))).collect();
    EffortGraph::new((0..m).map(|j| format!("a{j}")).collect(), features, weights, budget).expect("random graph is valid")
}

pub fn mechanism(rng: &mut ChaCha8Rng, n: usize) -> LinearMechanism {
    loop {
        let beta: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(0.0..1.0) }).collect();
        if let Ok(b) = LinearMechanism::new(beta) {
            return b;
        }
    }
}

/// Random exact profile with support exactly `support`, summing to `budget`.
pub fn profile_on(rng: &mut ChaCha8Rng, m: usize, support: &[usize], budget: &Rational) -> Vec<Rational> {
    let raw: Vec<Rational> = support.iter().map(|_| positive_rational(rng, 10, 1)).collect();
    let total: Rational = raw.iter().sum();
    let mut x = vec![ratio(0, 1); m];
    for (&j, r) in support.iter().zip(raw) {
        x[j] = r * budget / &total;
    }
    x
}

/// Nonempty random subset of `0..m`.
pub fn subset(rng: &mut ChaCha8Rng, m: usize) -> Vec<usize> {
    loop {
        let s: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.5)).collect();
        if !s.is_empty() {
            return s;
        }
    }
}
