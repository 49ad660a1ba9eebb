//! Substitutability values and mechanism synthesis.
//!
//! `kappa_j` is the least total effort that weakly improves every feature
//! while replacing one unit of effort on action `j`; `kappa_S` does the same
//! for the cheapest unit mixture over `S`. A profile can be made optimal by
//! some monotone mechanism exactly when the substitutability of its support
//! is 1, and then a linear mechanism doing so comes out of the LP dual to
//! the substitution problem.

use num_traits::{One, Signed, Zero};

use crate::agent::{kkt_verify, KktReport, GRADIENT_TOL};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpSolution, LpStatus, RowSense};
use crate::model::{EffortGraph, EffortProfile, LinearMechanism};
use crate::rational::{self, Rational, RATIONALIZE_DENOMINATOR};

/// Relative tolerance for [`in_polytope`].
pub const POLYTOPE_TOL: f64 = 1e-9;
/// Allowed deviation of the synthesis LP value from 1.
pub const SYNTHESIS_VALUE_TOL: f64 = 1e-9;
/// Float profile entries below this fraction of the budget are off the support.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

/// Exact substitutability with the optimal LP witnesses.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaCertificate {
    /// Actions whose effort is being substituted, ascending.
    pub set: Vec<usize>,
    pub kappa: Rational,
    /// Replacement effort `y`, length `m`.
    pub witness_y: Vec<Rational>,
    /// Substituted mixture `z`, length `m`, zero outside `set`. `None` for
    /// the single-action program, where `z = e_j` is fixed.
    pub witness_z: Option<Vec<Rational>>,
}

impl KappaCertificate {
    pub fn is_incentivizable(&self) -> bool {
        self.kappa.is_one()
    }

    /// Re-checks the witnesses against the graph: `y, z >= 0`,
    /// `alpha^T y >= alpha_S^T z`, `z^T 1_S >= 1`, `y^T 1 = kappa`.
    pub fn verify(&self, graph: &EffortGraph) -> bool {
        let m = graph.num_actions();
        if self.witness_y.len() != m || self.witness_y.iter().any(|v| v.is_negative()) {
            return false;
        }
        let z: Vec<Rational> = match &self.witness_z {
            Some(z) => {
                if z.len() != m || z.iter().any(|v| v.is_negative()) {
                    return false;
                }
                if z.iter().enumerate().any(|(j, v)| !v.is_zero() && self.set.binary_search(&j).is_err()) {
                    return false;
                }
                if z.iter().sum::<Rational>() < Rational::one() {
                    return false;
                }
                z.clone()
            }
            None => {
                if self.set.len() != 1 {
                    return false;
                }
                let mut e = vec![Rational::zero(); m];
                e[self.set[0]] = Rational::one();
                e
            }
        };
        for i in 0..graph.num_features() {
            let lhs: Rational = (0..m).map(|k| graph.weight(k, i) * &self.witness_y[k]).sum();
            let rhs: Rational = (0..m).map(|k| graph.weight(k, i) * &z[k]).sum();
            if lhs < rhs {
                return false;
            }
        }
        self.witness_y.iter().sum::<Rational>() == self.kappa && self.kappa <= Rational::one()
    }
}

fn check_action(graph: &EffortGraph, j: usize) -> Result<()> {
    if j >= graph.num_actions() {
        return Err(Error::ActionOutOfRange { index: j, len: graph.num_actions() });
    }
    Ok(())
}

fn optimal(sol: LpSolution, what: &str) -> Result<LpSolution> {
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        status => Err(Error::Lp(format!("{what}: {status:?}"))),
    }
}

/// `kappa_j = min 1^T y  s.t.  alpha^T y >= alpha_(j), y >= 0`.
pub fn kappa_of_action(graph: &EffortGraph, j: usize) -> Result<KappaCertificate> {
    check_action(graph, j)?;
    let m = graph.num_actions();
    let mut lp = LinearProgram::minimize(vec![Rational::one(); m]);
    for i in 0..graph.num_features() {
        let coeffs = (0..m).map(|k| graph.weight(k, i).clone()).collect();
        lp.add_row(coeffs, RowSense::Ge, graph.weight(j, i).clone())?;
    }
    let sol = optimal(lp.solve(), "action substitutability")?;
    Ok(KappaCertificate { set: vec![j], kappa: sol.value, witness_y: sol.primal, witness_z: None })
}

/// `kappa_S = min 1^T y  s.t.  alpha^T y >= alpha_S^T z, z^T 1_S >= 1, y, z >= 0`.
pub fn kappa_of_set(graph: &EffortGraph, set: &[usize]) -> Result<KappaCertificate> {
    let mut set = set.to_vec();
    set.sort_unstable();
    set.dedup();
    if set.is_empty() {
        return Err(Error::EmptySet("action set"));
    }
    for &j in &set {
        check_action(graph, j)?;
    }
    let m = graph.num_actions();
    let s = set.len();
    // Variables: y_0..y_{m-1}, then z_j for j in set.
    let mut costs = vec![Rational::one(); m];
    costs.extend(std::iter::repeat(Rational::zero()).take(s));
    let mut lp = LinearProgram::minimize(costs);
    for i in 0..graph.num_features() {
        let mut coeffs: Vec<Rational> = (0..m).map(|k| graph.weight(k, i).clone()).collect();
        coeffs.extend(set.iter().map(|&j| -graph.weight(j, i).clone()));
        lp.add_row(coeffs, RowSense::Ge, Rational::zero())?;
    }
    let mut mix = vec![Rational::zero(); m];
    mix.extend(std::iter::repeat(Rational::one()).take(s));
    lp.add_row(mix, RowSense::Ge, Rational::one())?;
    let sol = optimal(lp.solve(), "set substitutability")?;
    let witness_y = sol.primal[..m].to_vec();
    let mut witness_z = vec![Rational::zero(); m];
    for (k, &j) in set.iter().enumerate() {
        witness_z[j] = sol.primal[m + k].clone();
    }
    Ok(KappaCertificate { set, kappa: sol.value, witness_y, witness_z: Some(witness_z) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub incentivizable: bool,
    pub certificate: KappaCertificate,
}

/// Support of a target profile. Float entries are rationalized first and
/// entries below `SUPPORT_THRESHOLD * B` count as zero.
pub fn target_support(graph: &EffortGraph, x: &EffortProfile) -> Vec<usize> {
    if x.exact().is_some() {
        return x.support();
    }
    let cutoff = SUPPORT_THRESHOLD * graph.budget_f64();
    x.values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| {
            v >= cutoff && rational::approximate(v, RATIONALIZE_DENOMINATOR).is_some_and(|r| r.is_positive())
        })
        .map(|(j, _)| j)
        .collect()
}

/// Decides whether `x_star` is an optimal response to some monotone mechanism.
/// Depends only on the support of `x_star` and on the weights.
pub fn decide(graph: &EffortGraph, x_star: &EffortProfile) -> Result<Decision> {
    x_star.check_exhausts_budget(graph)?;
    let support = target_support(graph, x_star);
    let certificate = kappa_of_set(graph, &support)?;
    Ok(Decision { incentivizable: certificate.is_incentivizable(), certificate })
}

/// `A(x)` with each `f_i'` rounded to the nearest rational of denominator at
/// most `RATIONALIZE_DENOMINATOR`.
pub fn rationalized_marginal_matrix(graph: &EffortGraph, x: &EffortProfile) -> Result<Vec<Vec<Rational>>> {
    x.check_feasible(graph)?;
    let marg = graph.marginals(x.values());
    let mut d = Vec::with_capacity(marg.len());
    for (i, v) in marg.iter().enumerate() {
        let r = rational::approximate(*v, RATIONALIZE_DENOMINATOR).ok_or_else(|| {
            Error::DegenerateSynthesis(format!("marginal of feature {} is not finite", graph.features()[i].name))
        })?;
        d.push(r);
    }
    Ok((0..graph.num_actions())
        .map(|j| (0..graph.num_features()).map(|i| graph.weight(j, i) * &d[i]).collect())
        .collect())
}

/// `max beta^T c  s.t.  A beta <= 1, beta >= 0`.
fn mechanism_lp(a: &[Vec<Rational>], objective: Vec<Rational>) -> Result<LpSolution> {
    let mut lp = LinearProgram::maximize(objective);
    for row in a {
        lp.add_row(row.clone(), RowSense::Le, Rational::one())?;
    }
    optimal(lp.solve(), "mechanism program")
}

/// For `x* = B e_j`: `max beta^T a_j(x*)  s.t.  A(x*) beta <= 1, beta >= 0` on
/// rationalized marginals. Its value equals `kappa_j` by LP duality.
pub fn single_action_mechanism_lp(graph: &EffortGraph, j: usize) -> Result<LpSolution> {
    check_action(graph, j)?;
    let mut corner = vec![Rational::zero(); graph.num_actions()];
    corner[j] = graph.budget().clone();
    let x = EffortProfile::from_rationals(corner)?;
    let a = rationalized_marginal_matrix(graph, &x)?;
    let objective = a[j].clone();
    mechanism_lp(&a, objective)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    /// Rescaled so the largest weight is 1.
    pub beta: LinearMechanism,
    /// The LP optimum on rationalized data, before conversion to floats.
    pub beta_exact: Vec<Rational>,
    pub lp_value: Rational,
    pub kkt_residual: f64,
    pub kkt: KktReport,
    pub certificate: KappaCertificate,
}

/// Effort mixture `z = x*/B` as exact rationals summing to 1.
fn mixture(graph: &EffortGraph, x: &EffortProfile) -> Result<Vec<Rational>> {
    let raw: Vec<Rational> = match x.exact() {
        Some(exact) => exact.to_vec(),
        None => {
            let b = graph.budget_f64();
            let support = target_support(graph, x);
            let mut out = Vec::with_capacity(x.len());
            for (j, &v) in x.values().iter().enumerate() {
                if support.binary_search(&j).is_err() {
                    out.push(Rational::zero());
                    continue;
                }
                let share = v / b;
                let mut r = rational::approximate(share, RATIONALIZE_DENOMINATOR)
                    .ok_or_else(|| Error::InvalidProfile("non-finite entry".into()))?;
                if v > 0.0 && r.is_zero() {
                    // Keep tiny support entries in the support.
                    r = rational::from_f64_exact(share).expect("finite");
                }
                out.push(r);
            }
            out
        }
    };
    let total: Rational = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / &total).collect())
}

/// `A_S^T z`, the synthesis objective.
fn objective_row(a: &[Vec<Rational>], z: &[Rational]) -> Vec<Rational> {
    let n = a.first().map_or(0, Vec::len);
    (0..n)
        .map(|i| a.iter().zip(z).filter(|(_, zj)| !zj.is_zero()).map(|(row, zj)| &row[i] * zj).sum())
        .collect()
}

/// Among the optimal mechanisms, one maximizing the least gap `1 - a_j beta`
/// over actions off the support. `None` when every action is in the support.
fn widest_margin(
    a: &[Vec<Rational>],
    objective: &[Rational],
    optimum: &Rational,
    support: &[usize],
) -> Result<Option<Vec<Rational>>> {
    if support.len() == a.len() {
        return Ok(None);
    }
    let n = objective.len();
    // Variables: beta_0..beta_{n-1}, then the margin t.
    let mut costs = vec![Rational::zero(); n];
    costs.push(Rational::one());
    let mut lp = LinearProgram::maximize(costs);
    for (j, row) in a.iter().enumerate() {
        let mut coeffs = row.clone();
        coeffs.push(if support.binary_search(&j).is_ok() { Rational::zero() } else { Rational::one() });
        lp.add_row(coeffs, RowSense::Le, Rational::one())?;
    }
    let mut at_optimum = objective.to_vec();
    at_optimum.push(Rational::zero());
    lp.add_row(at_optimum, RowSense::Ge, optimum.clone())?;
    let mut cap = vec![Rational::zero(); n];
    cap.push(Rational::one());
    lp.add_row(cap, RowSense::Le, Rational::one())?;
    let sol = optimal(lp.solve(), "margin program")?;
    Ok(Some(sol.primal[..n].to_vec()))
}

/// Builds a linear mechanism under which `x_star` is an optimal response.
///
/// Solves `max beta^T (A_S(x*)^T z)  s.t.  A(x*) beta <= 1, beta >= 0` with
/// `z = x*/B`; when the support has substitutability 1 the optimum is 1 and
/// every optimal `beta` equalizes the partials on the support at their maximum.
/// Ties among optimal mechanisms go to the one leaving the widest gap to the
/// best action off the support.
pub fn synthesize(graph: &EffortGraph, x_star: &EffortProfile) -> Result<SynthesisResult> {
    let decision = decide(graph, x_star)?;
    if !decision.incentivizable {
        return Err(Error::NotIncentivizable(Box::new(decision.certificate)));
    }
    let z = mixture(graph, x_star)?;
    let a = rationalized_marginal_matrix(graph, x_star)?;
    let sol = mechanism_lp(&a, objective_row(&a, &z))?;
    let deviation = (rational::to_f64(&sol.value) - 1.0).abs();
    if deviation > SYNTHESIS_VALUE_TOL {
        return Err(Error::DegenerateSynthesis(format!(
            "mechanism program value {} differs from 1; marginals lost precision",
            rational::format(&sol.value)
        )));
    }
    let support: Vec<usize> = (0..z.len()).filter(|&j| !z[j].is_zero()).collect();
    let beta_exact = widest_margin(&a, &objective_row(&a, &z), &sol.value, &support)?.unwrap_or(sol.primal);
    let beta_f64: Vec<f64> = beta_exact.iter().map(rational::to_f64).collect();
    let beta = LinearMechanism::new(beta_f64)
        .map_err(|e| Error::DegenerateSynthesis(format!("mechanism program returned {e}")))?
        .max_normalized();
    let kkt = kkt_verify(graph, &beta, x_star)?;
    let kkt_residual = kkt.residual();
    if !kkt.verdict {
        return Err(Error::DegenerateSynthesis(format!(
            "synthesized mechanism fails the optimality check (residual {kkt_residual:e}, tolerance {GRADIENT_TOL:e})"
        )));
    }
    Ok(SynthesisResult {
        beta,
        beta_exact,
        lp_value: sol.value,
        kkt_residual,
        kkt,
        certificate: decision.certificate,
    })
}

/// Membership of `beta` in `L(x*) = {beta : A(x*) beta <= (1/B) x*^T A(x*) beta 1}`.
pub fn in_polytope(graph: &EffortGraph, beta: &LinearMechanism, x_star: &EffortProfile) -> Result<bool> {
    beta.check_len(graph)?;
    x_star.check_exhausts_budget(graph)?;
    let g = graph.partials_raw(beta.weights(), x_star.values());
    let rhs: f64 = x_star.values().iter().zip(&g).map(|(x, gj)| x * gj).sum::<f64>() / graph.budget_f64();
    let slack = POLYTOPE_TOL * rhs.abs();
    Ok(g.iter().all(|gj| *gj <= rhs + slack))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignatedFeasibility {
    pub feasible: bool,
    /// Actions of `D` with substitutability exactly 1, ascending.
    pub witnesses: Vec<usize>,
    pub kappas: Vec<(usize, Rational)>,
}

/// Some profile supported inside `designated` is incentivizable iff some
/// single designated action is.
pub fn feasible_designated(graph: &EffortGraph, designated: &[usize]) -> Result<DesignatedFeasibility> {
    let mut d = designated.to_vec();
    d.sort_unstable();
    d.dedup();
    if d.is_empty() {
        return Err(Error::EmptySet("designated set"));
    }
    let mut kappas = Vec::with_capacity(d.len());
    for &j in &d {
        kappas.push((j, kappa_of_action(graph, j)?.kappa));
    }
    let witnesses: Vec<usize> = kappas.iter().filter(|(_, k)| k.is_one()).map(|(j, _)| *j).collect();
    Ok(DesignatedFeasibility { feasible: !witnesses.is_empty(), witnesses, kappas })
}
