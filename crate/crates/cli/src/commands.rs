use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use incentix::rational::{self, Rational};
use incentix::{
    best_response, kappa_of_action, kappa_of_set, kkt_verify, optimize_profile, synthesize, utility, validate_graph,
    DesignatedSet, EffortGraph, EffortProfile, Error, KktReport, LinearMechanism, Objective, SimpleGraph,
};

use crate::document::{emit_graph, CertificateDocument, GraphDocument, SCHEMA};

pub const EXIT_OK: i32 = 0;
pub const EXIT_WARNINGS: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

/// Everything a command invocation produces.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome { code: EXIT_OK, stdout, stderr: String::new() }
    }

    fn input_error(message: impl std::fmt::Display) -> Self {
        Outcome { code: EXIT_INPUT, stdout: String::new(), stderr: format!("error: {message}\n") }
    }
}

#[derive(Debug, Parser)]
#[command(name = "incentix", version, about = "Decide, synthesize and simulate incentives in effort graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GraphArg {
    /// Effort graph document (JSON).
    graph: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a graph document for errors and warnings.
    Validate(GraphArg),
    /// Exact substitutability of one action or a set of actions.
    Kappa {
        #[command(flatten)]
        graph: GraphArg,
        #[arg(long, conflicts_with = "set", required_unless_present = "set")]
        action: Option<String>,
        /// Comma-separated action names.
        #[arg(long)]
        set: Option<String>,
    },
    /// Decide a target profile and build a linear mechanism incentivizing it.
    Synthesize {
        #[command(flatten)]
        graph: GraphArg,
        /// Comma-separated effort values (integers, p/q or decimals).
        #[arg(long, allow_hyphen_values = true)]
        profile: String,
    },
    /// Best response of the agent to a linear mechanism.
    Respond {
        #[command(flatten)]
        graph: GraphArg,
        /// Comma-separated feature weights.
        #[arg(long, allow_hyphen_values = true)]
        beta: String,
        /// Actions the evaluator wants effort on; others in the support are flagged.
        #[arg(long)]
        designated: Option<String>,
    },
    /// Best incentivizable profile inside a designated set.
    Optimize {
        #[command(flatten)]
        graph: GraphArg,
        #[arg(long)]
        designated: String,
        /// card | entropy | dot:w.. | neg_sq_dist:t.. | weighted_min:w..
        #[arg(long)]
        objective: String,
    },
    /// Best-response supports over a grid of two mechanism weights, as CSV.
    Sweep {
        #[command(flatten)]
        graph: GraphArg,
        /// feature:lo:hi:steps, given exactly twice.
        #[arg(long = "feature-grid", num_args = 1)]
        feature_grid: Vec<String>,
        /// feature=value for every feature not swept.
        #[arg(long, num_args = 1)]
        fixed: Vec<String>,
    },
    /// Independent-set gadget for a simple graph, as a graph document.
    Gadget {
        /// Edges like u-v,v-w.
        #[arg(long, conflicts_with = "file")]
        edges: Option<String>,
        /// Edge-list file: one `u v` or `u-v` per line, a lone name declares a vertex.
        #[arg(long)]
        file: Option<PathBuf>,
        /// Vertex names, in order, including isolated ones.
        #[arg(long)]
        vertices: Option<String>,
    },
}

/// Runs one invocation. `args` includes the program name.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => Outcome::ok(text),
                _ => Outcome { code: EXIT_INPUT, stdout: String::new(), stderr: text },
            };
        }
    };
    match cli.command {
        Command::Validate(g) => cmd_validate(&g.graph),
        Command::Kappa { graph, action, set } => with_graph(&graph.graph, |g| cmd_kappa(g, action.as_deref(), set.as_deref())),
        Command::Synthesize { graph, profile } => with_graph(&graph.graph, |g| cmd_synthesize(g, &profile)),
        Command::Respond { graph, beta, designated } => {
            with_graph(&graph.graph, |g| cmd_respond(g, &beta, designated.as_deref()))
        }
        Command::Optimize { graph, designated, objective } => {
            with_graph(&graph.graph, |g| cmd_optimize(g, &designated, &objective))
        }
        Command::Sweep { graph, feature_grid, fixed } => with_graph(&graph.graph, |g| cmd_sweep(g, &feature_grid, &fixed)),
        Command::Gadget { edges, file, vertices } => cmd_gadget(edges.as_deref(), file.as_deref(), vertices.as_deref()),
    }
}

fn read(path: &Path) -> Result<String, Outcome> {
    std::fs::read_to_string(path).map_err(|e| Outcome::input_error(format!("{}: {e}", path.display())))
}

fn load_document(path: &Path) -> Result<GraphDocument, Outcome> {
    let text = read(path)?;
    GraphDocument::parse(&text).map_err(|e| Outcome::input_error(format!("{}: {e}", path.display())))
}

/// Loads a valid graph, runs `f`, and prepends validation warnings to stderr.
fn with_graph(path: &Path, f: impl FnOnce(&EffortGraph) -> Outcome) -> Outcome {
    let doc = match load_document(path) {
        Ok(doc) => doc,
        Err(out) => return out,
    };
    let graph = match doc.to_graph() {
        Ok(g) => g,
        Err(e) => return Outcome::input_error(format!("{}: {e}", path.display())),
    };
    let mut out = f(&graph);
    let warnings: String =
        validate_graph(&graph).warnings().map(|w| format!("warning: {}\n", w.message)).collect();
    out.stderr = warnings + &out.stderr;
    out
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("outputs serialize");
    s.push('\n');
    s
}

/// Maps library errors to exit codes: obstructions and solver failures are 3,
/// everything else is bad input.
fn library_error(e: Error) -> Outcome {
    let code = match e {
        Error::NotIncentivizable(_)
        | Error::InfeasibleDesignatedSet
        | Error::NonConvergence { .. }
        | Error::DegenerateSynthesis(_) => EXIT_INFEASIBLE,
        _ => EXIT_INPUT,
    };
    Outcome { code, stdout: String::new(), stderr: format!("error: {e}\n") }
}

pub fn cmd_validate(path: &Path) -> Outcome {
    let doc = match load_document(path) {
        Ok(doc) => doc,
        Err(out) => return out,
    };
    let graph = match doc.to_graph_unvalidated() {
        Ok(g) => g,
        Err(e) => return Outcome::input_error(format!("{}: {e}", path.display())),
    };
    let report = validate_graph(&graph);
    let errors: Vec<&str> = report.errors().map(|i| i.message.as_str()).collect();
    let warnings: Vec<&str> = report.warnings().map(|i| i.message.as_str()).collect();
    let mut stderr = String::new();
    for e in &errors {
        let _ = writeln!(stderr, "error: {e}");
    }
    for w in &warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    let code = if !errors.is_empty() {
        EXIT_INPUT
    } else if !warnings.is_empty() {
        EXIT_WARNINGS
    } else {
        EXIT_OK
    };
    let stdout = to_json(&json!({ "schema": SCHEMA, "errors": errors, "warnings": warnings }));
    Outcome { code, stdout, stderr }
}

fn split_list(text: &str) -> Vec<&str> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn resolve_actions(graph: &EffortGraph, text: &str) -> Result<Vec<usize>, Outcome> {
    let names = split_list(text);
    if names.is_empty() {
        return Err(Outcome::input_error("empty action list"));
    }
    names
        .into_iter()
        .map(|name| graph.action_index(name).ok_or_else(|| Outcome::input_error(format!("unknown action {name:?}"))))
        .collect()
}

fn parse_rationals(text: &str, expected: usize, what: &str) -> Result<Vec<Rational>, Outcome> {
    let values: Vec<Rational> = split_list(text)
        .into_iter()
        .map(|s| rational::parse(s).map_err(|e| Outcome::input_error(format!("{what}: {e}"))))
        .collect::<Result<_, _>>()?;
    if values.len() != expected {
        return Err(Outcome::input_error(format!("{what} needs {expected} entries, got {}", values.len())));
    }
    Ok(values)
}

fn parse_floats(text: &str, expected: usize, what: &str) -> Result<Vec<f64>, Outcome> {
    Ok(parse_rationals(text, expected, what)?.iter().map(rational::to_f64).collect())
}

pub fn cmd_kappa(graph: &EffortGraph, action: Option<&str>, set: Option<&str>) -> Outcome {
    let cert = match (action, set) {
        (Some(name), _) => match graph.action_index(name) {
            Some(j) => kappa_of_action(graph, j),
            None => return Outcome::input_error(format!("unknown action {name:?}")),
        },
        (None, Some(list)) => match resolve_actions(graph, list) {
            Ok(set) => kappa_of_set(graph, &set),
            Err(out) => return out,
        },
        (None, None) => return Outcome::input_error("pass --action or --set"),
    };
    match cert {
        Ok(cert) => Outcome::ok(CertificateDocument::from_certificate(graph, &cert).to_json() + "\n"),
        Err(e) => library_error(e),
    }
}

pub fn cmd_synthesize(graph: &EffortGraph, profile: &str) -> Outcome {
    let x = match parse_rationals(profile, graph.num_actions(), "profile").map(EffortProfile::from_rationals) {
        Ok(Ok(x)) => x,
        Ok(Err(e)) => return library_error(e),
        Err(out) => return out,
    };
    match synthesize(graph, &x) {
        Ok(result) => {
            let doc = CertificateDocument::from_certificate(graph, &result.certificate).with_synthesis(&result);
            Outcome::ok(doc.to_json() + "\n")
        }
        Err(Error::NotIncentivizable(cert)) => Outcome {
            code: EXIT_INFEASIBLE,
            stdout: CertificateDocument::from_certificate(graph, &cert).to_json() + "\n",
            stderr: format!(
                "error: profile is not incentivizable: substitutability of its support is {} < 1\n",
                rational::format(&cert.kappa)
            ),
        },
        Err(e) => library_error(e),
    }
}

fn names(graph: &EffortGraph, indices: &[usize]) -> Vec<String> {
    indices.iter().map(|&j| graph.actions()[j].clone()).collect()
}

fn kkt_json(report: &KktReport) -> serde_json::Value {
    json!({
        "gradient": report.gradient,
        "budget_residual": report.budget_residual,
        "support_gap": report.support_gap,
        "equalization_gap": report.equalization_gap,
        "residual": report.residual(),
        "verdict": report.verdict,
    })
}

pub fn cmd_respond(graph: &EffortGraph, beta: &str, designated: Option<&str>) -> Outcome {
    let beta = match parse_floats(beta, graph.num_features(), "beta").map(LinearMechanism::new) {
        Ok(Ok(b)) => b,
        Ok(Err(e)) => return Outcome::input_error(e),
        Err(out) => return out,
    };
    let designated = match designated.map(|d| resolve_actions(graph, d)).transpose() {
        Ok(d) => d,
        Err(out) => return out,
    };
    let x = match best_response(graph, &beta) {
        Ok(x) => x,
        Err(e) => return library_error(e),
    };
    let report = kkt_verify(graph, &beta, &x).expect("dimensions already checked");
    let support = x.support();
    let undesired: Option<Vec<String>> = designated.map(|d| {
        let off: Vec<usize> = support.iter().copied().filter(|j| !d.contains(j)).collect();
        names(graph, &off)
    });
    let mut stderr = String::new();
    if let Some(off) = undesired.as_ref().filter(|o| !o.is_empty()) {
        let _ = writeln!(stderr, "undesired support: {}", off.join(", "));
    }
    let stdout = to_json(&json!({
        "schema": SCHEMA,
        "profile": x.values(),
        "support": names(graph, &support),
        "utility": utility(graph, &beta, &x).expect("feasible"),
        "kkt": kkt_json(&report),
        "undesired_support": undesired,
    }));
    Outcome { code: EXIT_OK, stdout, stderr }
}

fn parse_objective(graph: &EffortGraph, spec: &str) -> Result<Objective, Outcome> {
    let (kind, args) = spec.split_once(':').unwrap_or((spec, ""));
    let m = graph.num_actions();
    let vector = |what| parse_floats(args, m, what);
    let objective = match kind.trim() {
        "card" | "cardinality" => Objective::Cardinality,
        "entropy" => Objective::Entropy,
        "dot" => Objective::Dot(vector("dot weights")?),
        "neg_sq_dist" => Objective::NegSqDist(vector("target profile")?),
        "weighted_min" => Objective::WeightedMin(vector("weighted-min weights")?),
        other => return Err(Outcome::input_error(format!("unknown objective {other:?}"))),
    };
    if matches!(objective, Objective::Cardinality | Objective::Entropy) && !args.is_empty() {
        return Err(Outcome::input_error(format!("objective {kind} takes no arguments")));
    }
    Ok(objective)
}

pub fn cmd_optimize(graph: &EffortGraph, designated: &str, objective: &str) -> Outcome {
    let d = match resolve_actions(graph, designated).map(|d| DesignatedSet::new(graph, &d)) {
        Ok(Ok(d)) => d,
        Ok(Err(e)) => return library_error(e),
        Err(out) => return out,
    };
    let g = match parse_objective(graph, objective) {
        Ok(g) => g,
        Err(out) => return out,
    };
    match optimize_profile(graph, &d, &g) {
        Ok(r) => {
            let mut stderr = String::from("maximal incentivizable supports:\n");
            for s in &r.supports {
                let _ = writeln!(stderr, "  {{{}}}", names(graph, s).join(", "));
            }
            let stdout = to_json(&json!({
                "schema": SCHEMA,
                "face": names(graph, &r.face),
                "profile": r.x_star.values(),
                "value": r.value,
                "beta": r.beta.weights(),
                "kkt_residual": r.kkt.residual(),
                "supports": r.supports.iter().map(|s| names(graph, s)).collect::<Vec<_>>(),
            }));
            Outcome { code: EXIT_OK, stdout, stderr }
        }
        Err(Error::InfeasibleDesignatedSet) => Outcome {
            code: EXIT_INFEASIBLE,
            stdout: String::new(),
            stderr: "error: no designated action has substitutability 1, so no profile supported inside the \
                     designated set is incentivizable\n"
                .into(),
        },
        Err(e) => library_error(e),
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Grid {
    feature: usize,
    values: Vec<f64>,
}

fn parse_grid(graph: &EffortGraph, spec: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = spec.rsplitn(4, ':').collect();
    let [steps, hi, lo, name] = parts[..] else {
        return Err(format!("grid {spec:?} must look like feature:lo:hi:steps"));
    };
    let feature = graph.feature_index(name).ok_or_else(|| format!("unknown feature {name:?}"))?;
    let number = |s: &str| rational::parse(s).map(|r| rational::to_f64(&r)).map_err(|e| e.to_string());
    let (lo, hi) = (number(lo)?, number(hi)?);
    let steps: usize = steps.trim().parse().map_err(|_| format!("grid {spec:?}: steps must be a positive integer"))?;
    let values = match steps {
        0 => return Err(format!("grid {spec:?} has zero width")),
        1 if lo == hi => vec![lo],
        1 => return Err(format!("grid {spec:?}: a single step needs lo = hi")),
        _ if hi <= lo => return Err(format!("grid {spec:?} has zero width")),
        _ => (0..steps).map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64).collect(),
    };
    Ok(Grid { feature, values })
}

pub fn cmd_sweep(graph: &EffortGraph, grids: &[String], fixed: &[String]) -> Outcome {
    if grids.len() != 2 {
        return Outcome::input_error(format!("sweep needs exactly two --feature-grid options, got {}", grids.len()));
    }
    let grids = match grids.iter().map(|s| parse_grid(graph, s)).collect::<Result<Vec<_>, _>>() {
        Ok(g) => g,
        Err(e) => return Outcome::input_error(e),
    };
    if grids[0].feature == grids[1].feature {
        return Outcome::input_error("the two swept features must differ");
    }
    let mut beta: Vec<Option<f64>> = vec![None; graph.num_features()];
    for spec in fixed {
        let Some((name, value)) = spec.split_once('=') else {
            return Outcome::input_error(format!("--fixed {spec:?} must look like feature=value"));
        };
        let Some(i) = graph.feature_index(name.trim()) else {
            return Outcome::input_error(format!("unknown feature {name:?}"));
        };
        if grids.iter().any(|g| g.feature == i) {
            return Outcome::input_error(format!("feature {name} is both swept and fixed"));
        }
        match rational::parse(value) {
            Ok(v) => beta[i] = Some(rational::to_f64(&v)),
            Err(e) => return Outcome::input_error(e),
        }
    }
    for g in &grids {
        beta[g.feature] = Some(0.0);
    }
    if let Some(i) = beta.iter().position(Option::is_none) {
        return Outcome::input_error(format!("feature {} is neither swept nor fixed", graph.features()[i].name));
    }
    let mut beta: Vec<f64> = beta.into_iter().map(Option::unwrap).collect();

    let feature_name = |i: usize| &graph.features()[i].name;
    let mut csv = format!("beta_{},beta_{},support,utility\n", feature_name(grids[0].feature), feature_name(grids[1].feature));
    let mut stderr = String::new();
    let mut code = EXIT_OK;
    for &a in &grids[0].values {
        for &b in &grids[1].values {
            beta[grids[0].feature] = a;
            beta[grids[1].feature] = b;
            let mechanism = match LinearMechanism::new(beta.clone()) {
                Ok(m) => m,
                Err(e) => return Outcome::input_error(format!("at beta = {beta:?}: {e}")),
            };
            let x = match best_response(graph, &mechanism) {
                Ok(x) => x,
                Err(Error::NonConvergence { profile, .. }) => {
                    let _ = writeln!(stderr, "warning: best response did not converge at ({a}, {b})");
                    code = EXIT_WARNINGS;
                    *profile
                }
                Err(e) => return library_error(e),
            };
            let mut support: Vec<&str> = x.support().iter().map(|&j| graph.actions()[j].as_str()).collect();
            support.sort_unstable();
            let h = utility(graph, &mechanism, &x).expect("feasible");
            let _ = writeln!(csv, "{a},{b},{},{h}", support.join("+"));
        }
    }
    Outcome { code, stdout: csv, stderr }
}

fn parse_edge_token(token: &str) -> Result<(String, String), String> {
    let (u, v) = token
        .split_once('-')
        .ok_or_else(|| format!("edge {token:?} must look like u-v"))?;
    let (u, v) = (u.trim(), v.trim());
    if u.is_empty() || v.is_empty() {
        return Err(format!("edge {token:?} has an empty endpoint"));
    }
    Ok((u.to_string(), v.to_string()))
}

/// Builds a simple graph from declared vertices and named edges; vertices are
/// ordered by declaration, then by first appearance in the edges.
pub fn simple_graph_from_names(vertices: &[String], edges: &[(String, String)]) -> Result<SimpleGraph, String> {
    let mut order: Vec<String> = Vec::new();
    for v in vertices.iter().chain(edges.iter().flat_map(|(u, v)| [u, v])) {
        if !order.contains(v) {
            order.push(v.clone());
        }
    }
    let index = |v: &String| order.iter().position(|o| o == v).expect("collected above");
    let pairs: Vec<(usize, usize)> = edges.iter().map(|(u, v)| (index(u), index(v))).collect();
    SimpleGraph::new(order.clone(), &pairs).map_err(|e| e.to_string())
}

fn parse_edge_file(text: &str) -> Result<(Vec<String>, Vec<(String, String)>), String> {
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens[..] {
            [single] if single.contains('-') => edges.push(parse_edge_token(single).map_err(|e| format!("line {}: {e}", n + 1))?),
            [single] => vertices.push(single.to_string()),
            [u, v] => edges.push((u.to_string(), v.to_string())),
            _ => return Err(format!("line {}: expected `u v`, `u-v` or a vertex name", n + 1)),
        }
    }
    Ok((vertices, edges))
}

pub fn cmd_gadget(edges: Option<&str>, file: Option<&Path>, vertices: Option<&str>) -> Outcome {
    let mut declared: Vec<String> = vertices.map(|v| split_list(v).into_iter().map(String::from).collect()).unwrap_or_default();
    let edge_list = match (edges, file) {
        (Some(list), _) => match split_list(list).into_iter().map(parse_edge_token).collect::<Result<Vec<_>, _>>() {
            Ok(e) => e,
            Err(e) => return Outcome::input_error(e),
        },
        (None, Some(path)) => {
            let text = match read(path) {
                Ok(t) => t,
                Err(out) => return out,
            };
            match parse_edge_file(&text) {
                Ok((v, e)) => {
                    declared.extend(v);
                    e
                }
                Err(e) => return Outcome::input_error(format!("{}: {e}", path.display())),
            }
        }
        (None, None) => Vec::new(),
    };
    if declared.is_empty() && edge_list.is_empty() {
        return Outcome::input_error("gadget needs --edges, --file or --vertices");
    }
    match simple_graph_from_names(&declared, &edge_list) {
        Ok(g) => Outcome::ok(emit_graph(&incentix::gadget_from_graph(&g)) + "\n"),
        Err(e) => Outcome::input_error(e),
    }
}
