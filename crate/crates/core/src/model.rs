//! The effort-graph model: actions feed features through nonnegative weights,
//! each feature passes its input through a concave conversion function, and a
//! linear mechanism scores the resulting feature vector.

use std::fmt;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// Relative slack allowed when checking `sum(x) <= B` for float profiles.
pub const BUDGET_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// `c * y`
    Linear,
    /// `c * (1 - exp(-a * y))`
    ExpSat,
    /// `c * ln(1 + a * y)`
    Log1p,
    /// `c * (sqrt(y + s) - sqrt(s))`
    SqrtShift,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Linear, Family::ExpSat, Family::Log1p, Family::SqrtShift];

    pub fn name(self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::ExpSat => "expsat",
            Family::Log1p => "log1p",
            Family::SqrtShift => "sqrtshift",
        }
    }

    pub fn from_name(name: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == name)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A concave, strictly increasing effort conversion function.
///
/// All three parameters are carried for every family so documents round-trip
/// unchanged; each family reads only the ones it needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcaveFn {
    pub family: Family,
    pub scale: f64,
    pub rate: f64,
    pub shift: f64,
}

impl ConcaveFn {
    pub fn new(family: Family, scale: f64, rate: f64, shift: f64) -> Self {
        ConcaveFn { family, scale, rate, shift }
    }

    pub fn linear(scale: f64) -> Self {
        Self::new(Family::Linear, scale, 1.0, 0.0)
    }

    pub fn identity() -> Self {
        Self::linear(1.0)
    }

    pub fn expsat(scale: f64, rate: f64) -> Self {
        Self::new(Family::ExpSat, scale, rate, 0.0)
    }

    pub fn log1p(scale: f64, rate: f64) -> Self {
        Self::new(Family::Log1p, scale, rate, 0.0)
    }

    pub fn sqrtshift(scale: f64, shift: f64) -> Self {
        Self::new(Family::SqrtShift, scale, 1.0, shift)
    }

    pub fn value(&self, y: f64) -> f64 {
        let c = self.scale;
        match self.family {
            Family::Linear => c * y,
            Family::ExpSat => -c * (-self.rate * y).exp_m1(),
            Family::Log1p => c * (self.rate * y).ln_1p(),
            Family::SqrtShift => c * ((y + self.shift).sqrt() - self.shift.sqrt()),
        }
    }

    pub fn derivative(&self, y: f64) -> f64 {
        let c = self.scale;
        match self.family {
            Family::Linear => c,
            Family::ExpSat => c * self.rate * (-self.rate * y).exp(),
            Family::Log1p => c * self.rate / (1.0 + self.rate * y),
            Family::SqrtShift => c / (2.0 * (y + self.shift).sqrt()),
        }
    }

    /// Parameter problems, empty when the function is well defined on `y >= 0`.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let finite = self.scale.is_finite() && self.rate.is_finite() && self.shift.is_finite();
        if !finite {
            out.push("function parameters must be finite".to_string());
            return out;
        }
        if self.scale <= 0.0 {
            out.push(format!("scale must be positive (got {})", self.scale));
        }
        match self.family {
            Family::ExpSat | Family::Log1p if self.rate <= 0.0 => {
                out.push(format!("{} rate must be positive (got {})", self.family, self.rate));
            }
            // f'(0) is unbounded at zero shift.
            Family::SqrtShift if self.shift <= 0.0 => {
                out.push(format!("sqrtshift shift must be positive (got {})", self.shift));
            }
            _ => {}
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub name: String,
    pub f: ConcaveFn,
}

impl Feature {
    pub fn new(name: impl Into<String>, f: ConcaveFn) -> Self {
        Feature { name: name.into(), f }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    fn error(&mut self, message: String) {
        self.issues.push(Issue { severity: Severity::Error, message });
    }

    fn warning(&mut self, message: String) {
        self.issues.push(Issue { severity: Severity::Warning, message });
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    pub fn has_warnings(&self) -> bool {
        self.warnings().next().is_some()
    }

    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Bipartite action-to-feature graph with exact weights and budget.
#[derive(Debug, Clone, PartialEq)]
pub struct EffortGraph {
    actions: Vec<String>,
    features: Vec<Feature>,
    weights: Vec<Vec<Rational>>,
    budget: Rational,
    weights_f64: Vec<Vec<f64>>,
    budget_f64: f64,
}

impl EffortGraph {
    /// Builds a graph and rejects it if [`validate_graph`] reports any error.
    pub fn new(
        actions: Vec<String>,
        features: Vec<Feature>,
        weights: Vec<Vec<Rational>>,
        budget: Rational,
    ) -> Result<Self> {
        let graph = Self::new_unvalidated(actions, features, weights, budget)?;
        let report = validate_graph(&graph);
        if report.has_errors() {
            return Err(Error::InvalidGraph(
                report.errors().map(|i| i.message.clone()).collect(),
            ));
        }
        Ok(graph)
    }

    /// Builds a graph checking only matrix shape; used when invalid input has
    /// to be reported rather than rejected.
    pub fn new_unvalidated(
        actions: Vec<String>,
        features: Vec<Feature>,
        weights: Vec<Vec<Rational>>,
        budget: Rational,
    ) -> Result<Self> {
        if weights.len() != actions.len() {
            return Err(Error::DimensionMismatch {
                what: "weight rows",
                expected: actions.len(),
                found: weights.len(),
            });
        }
        for row in &weights {
            if row.len() != features.len() {
                return Err(Error::DimensionMismatch {
                    what: "weight columns",
                    expected: features.len(),
                    found: row.len(),
                });
            }
        }
        let weights_f64 = weights
            .iter()
            .map(|row| row.iter().map(rational::to_f64).collect())
            .collect();
        let budget_f64 = rational::to_f64(&budget);
        Ok(EffortGraph { actions, features, weights, budget, weights_f64, budget_f64 })
    }

    /// Convenience constructor with every feature sharing one function.
    pub fn uniform(
        actions: &[&str],
        features: &[&str],
        f: ConcaveFn,
        weights: Vec<Vec<Rational>>,
        budget: Rational,
    ) -> Result<Self> {
        Self::new(
            actions.iter().map(|s| s.to_string()).collect(),
            features.iter().map(|s| Feature::new(*s, f)).collect(),
            weights,
            budget,
        )
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn weight(&self, action: usize, feature: usize) -> &Rational {
        &self.weights[action][feature]
    }

    pub fn weights(&self) -> &[Vec<Rational>] {
        &self.weights
    }

    pub fn weight_f64(&self, action: usize, feature: usize) -> f64 {
        self.weights_f64[action][feature]
    }

    pub fn budget(&self) -> &Rational {
        &self.budget
    }

    pub fn budget_f64(&self) -> f64 {
        self.budget_f64
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == name)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Same graph with a different budget.
    pub fn with_budget(&self, budget: Rational) -> Result<Self> {
        Self::new(self.actions.clone(), self.features.clone(), self.weights.clone(), budget)
    }

    /// Same graph with feature `i` converted by `f` instead.
    pub fn with_function(&self, feature: usize, f: ConcaveFn) -> Result<Self> {
        let mut features = self.features.clone();
        features[feature].f = f;
        Self::new(self.actions.clone(), features, self.weights.clone(), self.budget.clone())
    }

    pub fn is_inert(&self, action: usize) -> bool {
        self.weights[action].iter().all(|w| w.is_zero())
    }

    /// Feature inputs `[alpha^T x]_i`.
    pub(crate) fn feature_inputs(&self, x: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.num_features()];
        for (row, &xj) in self.weights_f64.iter().zip(x) {
            if xj == 0.0 {
                continue;
            }
            for (ui, &w) in u.iter_mut().zip(row) {
                *ui += w * xj;
            }
        }
        u
    }

    pub(crate) fn utility_raw(&self, beta: &[f64], x: &[f64]) -> f64 {
        let mut u = Vec::new();
        self.utility_with_buffer(beta, x, &mut u)
    }

    /// [`Self::utility_raw`] reusing `u` for the feature inputs.
    pub(crate) fn utility_with_buffer(&self, beta: &[f64], x: &[f64], u: &mut Vec<f64>) -> f64 {
        u.clear();
        u.resize(self.num_features(), 0.0);
        for (row, &xj) in self.weights_f64.iter().zip(x) {
            if xj != 0.0 {
                for (ui, &w) in u.iter_mut().zip(row) {
                    *ui += w * xj;
                }
            }
        }
        self.features
            .iter()
            .zip(u.iter())
            .zip(beta)
            .map(|((feat, &ui), &b)| if b == 0.0 { 0.0 } else { b * feat.f.value(ui) })
            .sum()
    }

    /// Per-feature marginal `f_i'([alpha^T x]_i)`.
    pub(crate) fn marginals(&self, x: &[f64]) -> Vec<f64> {
        let u = self.feature_inputs(x);
        self.features.iter().zip(&u).map(|(feat, &ui)| feat.f.derivative(ui)).collect()
    }

    pub(crate) fn partials_raw(&self, beta: &[f64], x: &[f64]) -> Vec<f64> {
        let d = self.marginals(x);
        let scaled: Vec<f64> = d.iter().zip(beta).map(|(di, bi)| di * bi).collect();
        self.weights_f64
            .iter()
            .map(|row| row.iter().zip(&scaled).map(|(w, s)| w * s).sum())
            .collect()
    }

    /// Value and gradient in one pass.
    pub(crate) fn utility_and_partials(&self, beta: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
        let u = self.feature_inputs(x);
        let mut h = 0.0;
        let mut scaled = vec![0.0; u.len()];
        for (i, feat) in self.features.iter().enumerate() {
            if beta[i] != 0.0 {
                h += beta[i] * feat.f.value(u[i]);
                scaled[i] = beta[i] * feat.f.derivative(u[i]);
            }
        }
        let grad = self
            .weights_f64
            .iter()
            .map(|row| row.iter().zip(&scaled).map(|(w, s)| w * s).sum())
            .collect();
        (h, grad)
    }
}

/// Checks weights, budget and function parameters.
pub fn validate_graph(graph: &EffortGraph) -> ValidationReport {
    let mut report = ValidationReport::default();
    if graph.num_actions() == 0 {
        report.error("graph must have at least one action".into());
    }
    if graph.num_features() == 0 {
        report.error("graph must have at least one feature".into());
    }
    if !graph.budget.is_positive() {
        report.error(format!(
            "budget must be positive (got {})",
            rational::format(&graph.budget)
        ));
    }
    for (j, row) in graph.weights.iter().enumerate() {
        for (i, w) in row.iter().enumerate() {
            if w.is_negative() {
                report.error(format!(
                    "negative weight {} on edge {} -> {}",
                    rational::format(w),
                    graph.actions[j],
                    graph.features[i].name
                ));
            }
        }
    }
    for feat in &graph.features {
        for problem in feat.f.problems() {
            report.error(format!("feature {}: {problem}", feat.name));
        }
    }
    for (j, name) in graph.actions.iter().enumerate() {
        if graph.is_inert(j) {
            report.warning(format!("inert action {name}: it feeds no feature"));
        }
    }
    for (i, feat) in graph.features.iter().enumerate() {
        if graph.weights.iter().all(|row| row[i].is_zero()) {
            report.warning(format!("constant feature {}: no action feeds it", feat.name));
        }
    }
    let mut seen = std::collections::HashSet::new();
    for name in &graph.actions {
        if !seen.insert(name) {
            report.error(format!("duplicate action name {name}"));
        }
    }
    let mut seen = std::collections::HashSet::new();
    for feat in &graph.features {
        if !seen.insert(&feat.name) {
            report.error(format!("duplicate feature name {}", feat.name));
        }
    }
    report
}

/// A nonnegative allocation of effort over the actions.
///
/// Profiles parsed from exact input keep their rational values so budget
/// checks and synthesis can stay exact.
#[derive(Debug, Clone, PartialEq)]
pub struct EffortProfile {
    values: Vec<f64>,
    exact: Option<Vec<Rational>>,
}

impl EffortProfile {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidProfile(format!("entries must be finite and nonnegative (got {bad})")));
        }
        Ok(EffortProfile { values, exact: None })
    }

    pub fn from_rationals(values: Vec<Rational>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| v.is_negative()) {
            return Err(Error::InvalidProfile(format!(
                "entries must be nonnegative (got {})",
                rational::format(bad)
            )));
        }
        let floats = values.iter().map(rational::to_f64).collect();
        Ok(EffortProfile { values: floats, exact: Some(values) })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn exact(&self) -> Option<&[Rational]> {
        self.exact.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `S(x)`: indices with strictly positive effort.
    pub fn support(&self) -> Vec<usize> {
        match &self.exact {
            Some(exact) => (0..exact.len()).filter(|&j| exact[j].is_positive()).collect(),
            None => (0..self.values.len()).filter(|&j| self.values[j] > 0.0).collect(),
        }
    }

    fn check_len(&self, graph: &EffortGraph) -> Result<()> {
        if self.len() != graph.num_actions() {
            return Err(Error::DimensionMismatch {
                what: "effort profile",
                expected: graph.num_actions(),
                found: self.len(),
            });
        }
        Ok(())
    }

    /// `x >= 0` and `sum(x) <= B`.
    pub fn check_feasible(&self, graph: &EffortGraph) -> Result<()> {
        self.check_len(graph)?;
        let over = match &self.exact {
            Some(exact) => exact.iter().sum::<Rational>() > *graph.budget(),
            None => self.total() > graph.budget_f64() * (1.0 + BUDGET_TOLERANCE),
        };
        if over {
            return Err(Error::BudgetViolation { total: self.total(), budget: graph.budget_f64() });
        }
        Ok(())
    }

    /// `x >= 0` and `sum(x) = B`, exactly for rational profiles.
    pub fn check_exhausts_budget(&self, graph: &EffortGraph) -> Result<()> {
        self.check_len(graph)?;
        let off = match &self.exact {
            Some(exact) => exact.iter().sum::<Rational>() != *graph.budget(),
            None => {
                let b = graph.budget_f64();
                (self.total() - b).abs() > BUDGET_TOLERANCE * b
            }
        };
        if off {
            return Err(Error::BudgetViolation { total: self.total(), budget: graph.budget_f64() });
        }
        Ok(())
    }
}

/// Nonnegative feature weights, not all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMechanism(Vec<f64>);

impl LinearMechanism {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if beta.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::InvalidMechanism("weights must be finite and nonnegative".into()));
        }
        if beta.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidMechanism("weights must not all be zero".into()));
        }
        Ok(LinearMechanism(beta))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Rescaled so the largest weight is 1.
    pub fn max_normalized(&self) -> LinearMechanism {
        let max = self.0.iter().cloned().fold(0.0, f64::max);
        LinearMechanism(self.0.iter().map(|b| b / max).collect())
    }

    pub fn scaled(&self, c: f64) -> Result<LinearMechanism> {
        LinearMechanism::new(self.0.iter().map(|b| b * c).collect())
    }

    pub(crate) fn check_len(&self, graph: &EffortGraph) -> Result<()> {
        if self.len() != graph.num_features() {
            return Err(Error::DimensionMismatch {
                what: "mechanism",
                expected: graph.num_features(),
                found: self.len(),
            });
        }
        Ok(())
    }
}

/// `F_i = f_i(sum_j alpha_ji x_j)`.
pub fn feature_values(graph: &EffortGraph, x: &EffortProfile) -> Result<Vec<f64>> {
    x.check_feasible(graph)?;
    let u = graph.feature_inputs(x.values());
    Ok(graph.features.iter().zip(&u).map(|(feat, &ui)| feat.f.value(ui)).collect())
}

/// `H = beta^T F`.
pub fn utility(graph: &EffortGraph, beta: &LinearMechanism, x: &EffortProfile) -> Result<f64> {
    beta.check_len(graph)?;
    x.check_feasible(graph)?;
    Ok(graph.utility_raw(beta.weights(), x.values()))
}

/// `dH/dx_j = sum_i alpha_ji beta_i f_i'([alpha^T x]_i)`, i.e. `A(x) beta`.
pub fn partials(graph: &EffortGraph, beta: &LinearMechanism, x: &EffortProfile) -> Result<Vec<f64>> {
    beta.check_len(graph)?;
    x.check_feasible(graph)?;
    Ok(graph.partials_raw(beta.weights(), x.values()))
}

/// `A(x)` with `[A(x)]_ji = alpha_ji f_i'([alpha^T x]_i)`.
pub fn marginal_matrix(graph: &EffortGraph, x: &EffortProfile) -> Result<Vec<Vec<f64>>> {
    x.check_feasible(graph)?;
    let d = graph.marginals(x.values());
    Ok(graph
        .weights_f64
        .iter()
        .map(|row| row.iter().zip(&d).map(|(w, di)| w * di).collect())
        .collect())
}
