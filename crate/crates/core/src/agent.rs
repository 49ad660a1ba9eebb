//! The agent's side: best responses to a linear mechanism and the optimality
//! test that certifies them.
//!
//! A profile `x >= 0` is optimal for `max beta^T F(x)` over `sum(x) <= B` iff the
//! budget is spent, every supported action has the same partial derivative,
//! and no action has a larger one.

use crate::error::{Error, Result};
use crate::model::{EffortGraph, EffortProfile, LinearMechanism};
use crate::simplex::{self, AscentConfig};

/// Budget tolerance, relative to `B`.
pub const BUDGET_TOL: f64 = 1e-9;
/// Gradient tolerance, relative to the largest partial derivative.
pub const GRADIENT_TOL: f64 = 1e-7;
/// Stopping tolerance for the best-response solver.
pub const SOLVER_TOL: f64 = 1e-9;
pub const SOLVER_MAX_ITER: usize = 100_000;
/// Entries below this fraction of `B` are treated as zero when reading off a support.
pub const SUPPORT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// `dH/dx_j` at the profile.
    pub gradient: Vec<f64>,
    /// `B - sum(x)`.
    pub budget_residual: f64,
    /// Largest partial anywhere minus the smallest partial on the support.
    pub support_gap: f64,
    /// Spread of the partials on the support.
    pub equalization_gap: f64,
    pub budget_tol: f64,
    pub gradient_tol: f64,
    pub verdict: bool,
}

impl KktReport {
    /// Worst condition violation, each normalized by its tolerance scale
    /// (`B` for the budget, the largest partial for the gradients).
    pub fn residual(&self) -> f64 {
        let gscale = self.gradient_tol / GRADIENT_TOL;
        let bscale = self.budget_tol / BUDGET_TOL;
        let rel = |v: f64, s: f64| if s > 0.0 { v / s } else { v };
        rel(self.budget_residual.abs(), bscale)
            .max(rel(self.equalization_gap, gscale))
            .max(rel(self.support_gap.max(0.0), gscale))
    }
}

/// KKT test for `x` against `beta`. The support is read as `x_j > 0` exactly.
pub fn kkt_verify(graph: &EffortGraph, beta: &LinearMechanism, x: &EffortProfile) -> Result<KktReport> {
    beta.check_len(graph)?;
    if x.len() != graph.num_actions() {
        return Err(Error::DimensionMismatch {
            what: "effort profile",
            expected: graph.num_actions(),
            found: x.len(),
        });
    }
    let gradient = graph.partials_raw(beta.weights(), x.values());
    Ok(report_from_gradient(graph, x.values(), gradient))
}

fn report_from_gradient(graph: &EffortGraph, x: &[f64], gradient: Vec<f64>) -> KktReport {
    let b = graph.budget_f64();
    let budget_residual = b - x.iter().sum::<f64>();
    let gmax = gradient.iter().cloned().fold(0.0, f64::max);
    let on_support: Vec<f64> = x.iter().zip(&gradient).filter(|(xj, _)| **xj > 0.0).map(|(_, g)| *g).collect();
    let (equalization_gap, support_gap) = if on_support.is_empty() {
        (0.0, gmax)
    } else {
        let smin = on_support.iter().cloned().fold(f64::INFINITY, f64::min);
        let smax = on_support.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (smax - smin, gmax - smin)
    };
    let budget_tol = BUDGET_TOL * b;
    let gradient_tol = GRADIENT_TOL * gmax;
    let verdict = !on_support.is_empty()
        && budget_residual.abs() <= budget_tol
        && equalization_gap <= gradient_tol
        && support_gap <= gradient_tol;
    KktReport { gradient, budget_residual, support_gap, equalization_gap, budget_tol, gradient_tol, verdict }
}

/// Zeroes entries below `SUPPORT_EPS * total` and rescales the rest to sum to `total`.
pub fn clean_support(x: &[f64], total: f64) -> Vec<f64> {
    let mut out: Vec<f64> = x.iter().map(|&v| if v < SUPPORT_EPS * total { 0.0 } else { v }).collect();
    let s: f64 = out.iter().sum();
    if s > 0.0 {
        for v in out.iter_mut() {
            *v *= total / s;
        }
    }
    out
}

/// Optimal effort profile for `beta`, by projected gradient ascent on
/// `{x >= 0, sum(x) = B}` from the uniform profile.
///
/// The returned profile passes [`kkt_verify`]. Entries below `SUPPORT_EPS * B`
/// are zeroed when that keeps the certificate valid. Among several optima any
/// one may be returned.
pub fn best_response(graph: &EffortGraph, beta: &LinearMechanism) -> Result<EffortProfile> {
    beta.check_len(graph)?;
    let m = graph.num_actions();
    let b = graph.budget_f64();
    let cfg = AscentConfig { max_iter: SOLVER_MAX_ITER, tol: SOLVER_TOL, ..AscentConfig::default() };
    let result = simplex::projected_ascent(
        vec![b / m as f64; m],
        b,
        cfg,
        |x| graph.utility_and_partials(beta.weights(), x),
        |g| g.iter().cloned().fold(0.0, f64::max),
    );

    let cleaned = clean_support(&result.x, b);
    let cleaned_report = report_from_gradient(graph, &cleaned, graph.partials_raw(beta.weights(), &cleaned));
    let (x, report) = if cleaned_report.verdict {
        (cleaned, cleaned_report)
    } else {
        let raw = report_from_gradient(graph, &result.x, result.grad.clone());
        (result.x, raw)
    };
    let profile = EffortProfile::new(x)?;
    if !report.verdict {
        return Err(Error::NonConvergence {
            iterations: result.iterations,
            profile: Box::new(profile),
            report: Box::new(report),
        });
    }
    Ok(profile)
}

/// Largest lattice size [`brute_force_response`] accepts.
pub const BRUTE_FORCE_MAX_ACTIONS: usize = 4;

/// Exhaustive search over `{x : x_j = k_j * step, sum(x) = B}`; the last
/// coordinate absorbs any remainder when `B / step` is not integral. Ties go
/// to the lexicographically first lattice point.
pub fn brute_force_response(graph: &EffortGraph, beta: &LinearMechanism, step: f64) -> Result<EffortProfile> {
    beta.check_len(graph)?;
    let m = graph.num_actions();
    if m > BRUTE_FORCE_MAX_ACTIONS {
        return Err(Error::InstanceTooLarge(format!(
            "brute force supports at most {BRUTE_FORCE_MAX_ACTIONS} actions, got {m}"
        )));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidProfile(format!("grid step must be positive, got {step}")));
    }
    let b = graph.budget_f64();
    let units = (b / step + 1e-9).floor() as usize;
    let mut counts = vec![0usize; m.saturating_sub(1)];
    let mut x = vec![0.0; m];
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut buffer = Vec::with_capacity(graph.num_features());
    loop {
        let used: usize = counts.iter().sum();
        if used <= units {
            for (xj, &k) in x.iter_mut().zip(&counts) {
                *xj = k as f64 * step;
            }
            x[m - 1] = (b - used as f64 * step).max(0.0);
            let h = graph.utility_with_buffer(beta.weights(), &x, &mut buffer);
            if best.as_ref().is_none_or(|(bh, _)| h > *bh) {
                best = Some((h, x.clone()));
            }
        }
        // Odometer over counts, lexicographic order.
        let mut pos = counts.len();
        loop {
            if pos == 0 {
                let (_, xbest) = best.expect("lattice has at least one point");
                return EffortProfile::new(xbest);
            }
            pos -= 1;
            let rest: usize = counts[..pos].iter().sum();
            if rest + counts[pos] < units {
                counts[pos] += 1;
                for c in counts[pos + 1..].iter_mut() {
                    *c = 0;
                }
                break;
            }
        }
    }
}
