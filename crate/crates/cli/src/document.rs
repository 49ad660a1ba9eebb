//! JSON documents: effort graphs in, certificates out.
//!
//! Weights and budgets are exact. They are written as JSON integers when they
//! are integral and as `"p/q"` strings otherwise; on input either form is
//! accepted, as are exact decimal strings such as `"0.25"`.

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use incentix::rational::{self, Rational};
use incentix::{ConcaveFn, EffortGraph, Family, Feature, KappaCertificate};

pub const SCHEMA: u32 = 1;

/// A document problem together with where it was found, when known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentError {
    pub message: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
}

impl DocumentError {
    fn semantic(message: String) -> Self {
        DocumentError { message, line: None, column: None }
    }
}

impl std::fmt::Display for DocumentError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for DocumentError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalText {
    Integer(i64),
    Text(String),
}

impl RationalText {
    pub fn from_rational(r: &Rational) -> Self {
        match (r.is_integer(), r.numer().to_i64()) {
            (true, Some(n)) => RationalText::Integer(n),
            _ => RationalText::Text(rational::format(r)),
        }
    }

    pub fn to_rational(&self) -> Result<Rational, String> {
        match self {
            RationalText::Integer(n) => Ok(rational::int(*n)),
            RationalText::Text(s) => rational::parse(s).map_err(|e| e.to_string()),
        }
    }
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionDocument {
    pub family: String,
    #[serde(default = "default_one")]
    pub scale: f64,
    #[serde(default = "default_one")]
    pub rate: f64,
    #[serde(default)]
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureDocument {
    pub name: String,
    pub f: FunctionDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDocument {
    pub action: String,
    pub feature: String,
    pub weight: RationalText,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub actions: Vec<String>,
    pub features: Vec<FeatureDocument>,
    #[serde(default)]
    pub edges: Vec<EdgeDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<RationalText>,
}

impl GraphDocument {
    pub fn parse(text: &str) -> Result<Self, DocumentError> {
        serde_json::from_str(text).map_err(|e| DocumentError {
            message: e.to_string(),
            line: Some(e.line()),
            column: Some(e.column()),
        })
    }

    pub fn from_graph(graph: &EffortGraph) -> Self {
        let features = graph
            .features()
            .iter()
            .map(|feat| FeatureDocument {
                name: feat.name.clone(),
                f: FunctionDocument {
                    family: feat.f.family.name().to_string(),
                    scale: feat.f.scale,
                    rate: feat.f.rate,
                    shift: feat.f.shift,
                },
            })
            .collect();
        let mut edges = Vec::new();
        for (j, action) in graph.actions().iter().enumerate() {
            for (i, feat) in graph.features().iter().enumerate() {
                let w = graph.weight(j, i);
                if !num_traits::Zero::is_zero(w) {
                    edges.push(EdgeDocument {
                        action: action.clone(),
                        feature: feat.name.clone(),
                        weight: RationalText::from_rational(w),
                    });
                }
            }
        }
        GraphDocument {
            actions: graph.actions().to_vec(),
            features,
            edges,
            budget: Some(RationalText::from_rational(graph.budget())),
        }
    }

    /// Builds the graph without rejecting semantically invalid values such as
    /// negative weights, so they can be reported by validation.
    pub fn to_graph_unvalidated(&self) -> Result<EffortGraph, DocumentError> {
        let mut features = Vec::with_capacity(self.features.len());
        for feat in &self.features {
            let family = Family::from_name(&feat.f.family).ok_or_else(|| {
                DocumentError::semantic(format!(
                    "feature {}: unknown family {:?} (expected one of linear, expsat, log1p, sqrtshift)",
                    feat.name, feat.f.family
                ))
            })?;
            features.push(Feature::new(
                feat.name.clone(),
                ConcaveFn::new(family, feat.f.scale, feat.f.rate, feat.f.shift),
            ));
        }
        let index_of = |names: &[String], name: &str, what: &str| {
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| DocumentError::semantic(format!("edge references unknown {what} {name:?}")))
        };
        let feature_names: Vec<String> = self.features.iter().map(|f| f.name.clone()).collect();
        let mut weights = vec![vec![rational::int(0); features.len()]; self.actions.len()];
        let mut seen = vec![vec![false; features.len()]; self.actions.len()];
        for edge in &self.edges {
            let j = index_of(&self.actions, &edge.action, "action")?;
            let i = index_of(&feature_names, &edge.feature, "feature")?;
            if seen[j][i] {
                return Err(DocumentError::semantic(format!(
                    "duplicate edge {} -> {}",
                    edge.action, edge.feature
                )));
            }
            seen[j][i] = true;
            weights[j][i] = edge.weight.to_rational().map_err(|e| {
                DocumentError::semantic(format!("edge {} -> {}: {e}", edge.action, edge.feature))
            })?;
        }
        let budget = match &self.budget {
            Some(b) => b.to_rational().map_err(|e| DocumentError::semantic(format!("budget: {e}")))?,
            None => rational::int(1),
        };
        EffortGraph::new_unvalidated(self.actions.clone(), features, weights, budget)
            .map_err(|e| DocumentError::semantic(e.to_string()))
    }

    /// Builds the graph and rejects it when validation reports an error.
    pub fn to_graph(&self) -> Result<EffortGraph, DocumentError> {
        let graph = self.to_graph_unvalidated()?;
        let report = incentix::validate_graph(&graph);
        if report.has_errors() {
            let messages: Vec<String> = report.errors().map(|i| i.message.clone()).collect();
            return Err(DocumentError::semantic(messages.join("; ")));
        }
        Ok(graph)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph documents serialize")
    }
}

pub fn parse_graph(text: &str) -> Result<EffortGraph, DocumentError> {
    GraphDocument::parse(text)?.to_graph()
}

pub fn emit_graph(graph: &EffortGraph) -> String {
    GraphDocument::from_graph(graph).to_json()
}

/// Exact substitutability with its witnesses, and optionally a synthesized
/// mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateDocument {
    pub schema: u32,
    /// Action names of the substituted set.
    pub set: Vec<String>,
    pub kappa: String,
    pub witness_y: Vec<String>,
    pub witness_z: Option<Vec<String>>,
    /// `kappa == 1`.
    pub verdict: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_exact: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lp_value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kkt_residual: Option<f64>,
}

fn strings(v: &[Rational]) -> Vec<String> {
    v.iter().map(rational::format).collect()
}

impl CertificateDocument {
    pub fn from_certificate(graph: &EffortGraph, cert: &KappaCertificate) -> Self {
        CertificateDocument {
            schema: SCHEMA,
            set: cert.set.iter().map(|&j| graph.actions()[j].clone()).collect(),
            kappa: rational::format(&cert.kappa),
            witness_y: strings(&cert.witness_y),
            witness_z: cert.witness_z.as_deref().map(strings),
            verdict: cert.is_incentivizable(),
            beta: None,
            beta_exact: None,
            lp_value: None,
            kkt_residual: None,
        }
    }

    pub fn with_synthesis(mut self, result: &incentix::SynthesisResult) -> Self {
        self.beta = Some(result.beta.weights().to_vec());
        self.beta_exact = Some(strings(&result.beta_exact));
        self.lp_value = Some(rational::format(&result.lp_value));
        self.kkt_residual = Some(result.kkt_residual);
        self
    }

    /// Parses every rational field back to exact values.
    pub fn kappa_value(&self) -> Result<Rational, String> {
        rational::parse(&self.kappa).map_err(|e| e.to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificates serialize")
    }
}
