mod common;

use std::collections::HashMap;
use std::path::PathBuf;

use rand::Rng;

use incentix::rational::int;
use incentix::scenarios;
use incentix_cli::{emit_graph, parse_graph, run, Outcome, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_OK, EXIT_WARNINGS};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn incentix(args: &[&str]) -> Outcome {
    run(std::iter::once("incentix").chain(args.iter().copied()))
}

fn json(out: &Outcome) -> serde_json::Value {
    serde_json::from_str(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", out.stdout))
}

fn temp_document(name: &str, text: &str) -> String {
    let dir = std::env::temp_dir().join(format!("incentix-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn sweep_rows(csv: &str) -> Vec<(f64, f64, String)> {
    csv.lines()
        .skip(1)
        .map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            (cols[0].parse().unwrap(), cols[1].parse().unwrap(), cols[2].to_string())
        })
        .collect()
}

fn point_label(b2: f64, b3: f64) -> String {
    let g2 = format!("2:{b2}:{b2}:1");
    let g3 = format!("3:{b3}:{b3}:1");
    let out = incentix(&["sweep", &fixture("nonconvex_a22zero.json"), "--feature-grid", &g2, "--feature-grid", &g3, "--fixed", "1=1"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let rows = sweep_rows(&out.stdout);
    assert_eq!(rows.len(), 1);
    rows[0].2.clone()
}

#[test]
fn validate_fixtures_and_bad_documents() {
    for name in ["classroom.json", "classroom_weak.json", "nonconvex.json", "gadget_k2.json", "gadget_path3.json"] {
        assert_eq!(incentix(&["validate", &fixture(name)]).code, EXIT_OK, "{name}");
    }
    let inert = incentix(&["validate", &fixture("nonconvex_a22zero.json")]);
    assert_eq!(inert.code, EXIT_WARNINGS);
    assert!(inert.stderr.contains("inert"), "{}", inert.stderr);

    let negative = temp_document(
        "negative.json",
        r#"{"actions": ["a"], "features": [{"name": "F", "f": {"family": "linear"}}],
            "edges": [{"action": "a", "feature": "F", "weight": "-1"}]}"#,
    );
    let out = incentix(&["validate", &negative]);
    assert_eq!(out.code, EXIT_INPUT);
    assert!(out.stderr.contains("negative weight"), "{}", out.stderr);

    let broken = temp_document("broken.json", "{\n  \"actions\": [\"a\"],\n  \"features\": [\n");
    let out = incentix(&["validate", &broken]);
    assert_eq!(out.code, EXIT_INPUT);
    assert!(out.stderr.contains("line"), "{}", out.stderr);

    assert_eq!(incentix(&["validate", "/nonexistent/graph.json"]).code, EXIT_INPUT);
}

#[test]
fn kappa_examples() {
    let out = incentix(&["kappa", &fixture("classroom.json"), "--action", "study"]);
    assert_eq!(out.code, EXIT_OK);
    assert_eq!(json(&out)["kappa"], "1");
    assert_eq!(json(&out)["verdict"], true);

    let out = incentix(&["kappa", &fixture("gadget_k2.json"), "--set", "u,v"]);
    assert_eq!(out.code, EXIT_OK);
    assert_eq!(json(&out)["kappa"], "3/4");
    assert_eq!(json(&out)["verdict"], false);

    let out = incentix(&["kappa", &fixture("nonconvex_a22zero.json"), "--action", "2"]);
    assert_eq!(json(&out)["kappa"], "0");

    assert_eq!(incentix(&["kappa", &fixture("classroom.json"), "--action", "nap"]).code, EXIT_INPUT);
}

#[test]
fn synthesize_examples() {
    let out = incentix(&["synthesize", &fixture("nonconvex.json"), "--profile", "1/3,0,2/3,0"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let beta: Vec<f64> = json(&out)["beta"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let e = std::f64::consts::E;
    for (got, want) in beta.iter().zip([1.0, (1.0f64 / 3.0).exp() / 2.0, e / 4.0]) {
        assert!((got - want).abs() < 1e-9, "{beta:?}");
    }
    assert!((beta[1] - 0.69780).abs() < 1e-5 && (beta[2] - 0.67957).abs() < 1e-5);

    let out = incentix(&["synthesize", &fixture("gadget_k2.json"), "--profile", "1/2,1/2,0"]);
    assert_eq!(out.code, EXIT_INFEASIBLE);
    assert_eq!(json(&out)["kappa"], "3/4");

    let out = incentix(&["synthesize", &fixture("classroom.json"), "--profile", "0,1,0"]);
    assert_eq!(out.code, EXIT_OK);
    assert_eq!(json(&out)["beta"], serde_json::json!([1.0, 1.0]));

    let out = incentix(&["synthesize", &fixture("classroom.json"), "--profile", "0,1/2,0"]);
    assert_eq!(out.code, EXIT_INPUT);
    let out = incentix(&["synthesize", &fixture("classroom.json"), "--profile", "0,1"]);
    assert_eq!(out.code, EXIT_INPUT);
}

#[test]
fn respond_examples() {
    let out = incentix(&["respond", &fixture("classroom.json"), "--beta", "1,1"]);
    assert_eq!(out.code, EXIT_OK);
    let profile: Vec<f64> = json(&out)["profile"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((profile[1] - 1.0).abs() < 1e-9 && profile[0] < 1e-9 && profile[2] < 1e-9, "{profile:?}");

    let mid = scenarios::nonconvex_beta_midpoint();
    let beta: Vec<String> = mid.weights().iter().map(f64::to_string).collect();
    let out = incentix(&["respond", &fixture("nonconvex.json"), "--beta", &beta.join(","), "--designated", "1,3"]);
    assert_eq!(out.code, EXIT_OK);
    let undesired = json(&out)["undesired_support"].as_array().unwrap().clone();
    assert!(undesired.iter().any(|v| v == "2" || v == "4"), "{undesired:?}");
    assert!(out.stderr.contains("undesired support"), "{}", out.stderr);

    assert_eq!(incentix(&["respond", &fixture("classroom.json"), "--beta", "0,0"]).code, EXIT_INPUT);
    assert_eq!(incentix(&["respond", &fixture("classroom.json"), "--beta", "1,-1"]).code, EXIT_INPUT);
}

#[test]
fn optimize_examples() {
    let out = incentix(&["optimize", &fixture("gadget_path3.json"), "--designated", "u,v,w", "--objective", "card"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let doc = json(&out);
    assert_eq!(doc["face"], serde_json::json!(["u", "w"]));
    assert_eq!(doc["value"], 2.0);

    let out = incentix(&[
        "optimize",
        &fixture("nonconvex.json"),
        "--designated",
        "1,3",
        "--objective",
        "neg_sq_dist:1/3,0,2/3,0",
    ]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    assert!(json(&out)["value"].as_f64().unwrap().abs() < 1e-9);

    let out = incentix(&["optimize", &fixture("classroom_weak.json"), "--designated", "study", "--objective", "card"]);
    assert_eq!(out.code, EXIT_INFEASIBLE);

    let out = incentix(&["optimize", &fixture("classroom.json"), "--designated", "study", "--objective", "cubic"]);
    assert_eq!(out.code, EXIT_INPUT);
}

#[test]
fn sweep_region_is_not_convex() {
    let beta = scenarios::nonconvex_beta().max_normalized();
    let prime = scenarios::nonconvex_beta_prime().max_normalized();
    let (b, p) = (beta.weights(), prime.weights());
    assert_eq!(point_label(b[1], b[2]), "1+3");
    assert_eq!(point_label(p[1], p[2]), "1+3");
    let mid = point_label(0.5 * (b[1] + p[1]), 0.5 * (b[2] + p[2]));
    assert!(mid.split('+').any(|a| a == "2" || a == "4"), "{mid}");
    assert_eq!(point_label(0.0, 0.0), "1");
}

#[test]
fn sweep_grid_shape_and_determinism() {
    let args = [
        "sweep",
        &fixture("nonconvex_a22zero.json"),
        "--feature-grid",
        "2:0:1.5:50",
        "--feature-grid",
        "3:0:1.5:50",
        "--fixed",
        "1=1",
    ];
    let first = incentix(&args);
    assert_eq!(first.code, EXIT_OK, "{}", first.stderr);
    assert!(first.stdout.starts_with("beta_2,beta_3,support,utility\n"));
    let rows = sweep_rows(&first.stdout);
    assert_eq!(rows.len(), 2500);
    assert_eq!(rows[1].0, 0.0);
    assert!(rows[1].1 > 0.0);
    assert_eq!(rows[0].2, "1");

    let labels: HashMap<(usize, usize), &str> =
        rows.iter().enumerate().map(|(k, r)| ((k / 50, k % 50), r.2.as_str())).collect();
    let region: Vec<(usize, usize)> = labels.iter().filter(|(_, l)| **l == "1+3").map(|(&p, _)| p).collect();
    assert!(!region.is_empty());
    let broken = region.iter().any(|&(a2, a3)| {
        region.iter().any(|&(c2, c3)| {
            (a2 + c2) % 2 == 0 && (a3 + c3) % 2 == 0 && labels[&((a2 + c2) / 2, (a3 + c3) / 2)] != "1+3"
        })
    });
    assert!(broken, "the 1+3 region of the grid should not be convex");

    assert_eq!(incentix(&args).stdout, first.stdout);
}

#[test]
fn sweep_rejects_bad_grids() {
    let g = fixture("nonconvex_a22zero.json");
    let bad = |grid: &str| incentix(&["sweep", &g, "--feature-grid", grid, "--feature-grid", "3:0:1:3", "--fixed", "1=1"]).code;
    assert_eq!(bad("2:0:1:0"), EXIT_INPUT);
    assert_eq!(bad("2:1:1:5"), EXIT_INPUT);
    assert_eq!(bad("2:0:1:1"), EXIT_INPUT);
    assert_eq!(bad("9:0:1:3"), EXIT_INPUT);
    assert_eq!(incentix(&["sweep", &g, "--feature-grid", "2:0:1:3", "--fixed", "1=1"]).code, EXIT_INPUT);
    assert_eq!(incentix(&["sweep", &g, "--feature-grid", "2:0:1:3", "--feature-grid", "3:0:1:3"]).code, EXIT_INPUT);
}

#[test]
fn gadget_examples() {
    let k2 = incentix(&["gadget", "--edges", "u-v"]);
    assert_eq!(k2.code, EXIT_OK);
    let fixture_text = std::fs::read_to_string(fixture("gadget_k2.json")).unwrap();
    assert_eq!(parse_graph(&k2.stdout).unwrap(), parse_graph(&fixture_text).unwrap());

    let path = incentix(&["gadget", "--edges", "u-v,v-w"]);
    assert_eq!(parse_graph(&path.stdout).unwrap().num_actions(), 5);

    let diagonal = parse_graph(&incentix(&["gadget", "--vertices", "a,b", "--edges", ""]).stdout).unwrap();
    assert_eq!(diagonal.num_actions(), 2);
    assert_eq!(diagonal.weight(0, 1), &int(0));
    assert_eq!(diagonal.weight(0, 0), &int(3));

    assert_eq!(incentix(&["gadget", "--edges", "u-u"]).code, EXIT_INPUT);

    let file = temp_document("edges.txt", "# path\nu v\nv-w\nx\n");
    let from_file = parse_graph(&incentix(&["gadget", "--file", &file]).stdout).unwrap();
    assert_eq!(from_file.actions(), &["x", "u", "v", "w", "u-v", "v-w"]);
}

#[test]
fn documents_round_trip() {
    for name in ["classroom.json", "classroom_weak.json", "nonconvex.json", "nonconvex_a22zero.json", "gadget_k2.json", "gadget_path3.json"] {
        let text = std::fs::read_to_string(fixture(name)).unwrap();
        let g = incentix_cli::document::GraphDocument::parse(&text).unwrap().to_graph_unvalidated().unwrap();
        assert_eq!(parse_graph(&emit_graph(&g)).unwrap(), g, "{name}");
    }
    let mut rng = common::rng(11);
    for _ in 0..200 {
        let m = rng.gen_range(1..=6);
        let n = rng.gen_range(1..=5);
        let budget = common::positive_rational(&mut rng, 7, 5);
        let g = common::graph(&mut rng, m, n, 0.5, budget);
        assert_eq!(parse_graph(&emit_graph(&g)).unwrap(), g);
    }
}

#[test]
fn help_version_and_usage_errors() {
    assert_eq!(incentix(&["--help"]).code, EXIT_OK);
    assert_eq!(incentix(&["--version"]).code, EXIT_OK);
    assert_eq!(incentix(&[]).code, EXIT_INPUT);
    assert_eq!(incentix(&["frobnicate"]).code, EXIT_INPUT);
    assert_eq!(incentix(&["kappa", &fixture("classroom.json")]).code, EXIT_INPUT);
}
