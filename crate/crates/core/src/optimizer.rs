//! Incentivizable supports inside a designated set, objective maximization
//! over incentivizable profiles, and the independent-set gadget.

use std::fmt;
use std::sync::Arc;

use num_traits::One;
use rayon::prelude::*;

use crate::agent::{clean_support, kkt_verify, KktReport};
use crate::error::{Error, Result};
use crate::incentive::{feasible_designated, kappa_of_set, synthesize, SynthesisResult};
use crate::model::{ConcaveFn, EffortGraph, EffortProfile, Feature, LinearMechanism};
use crate::rational::int;
use crate::simplex::{self, AscentConfig};

pub const MAX_DESIGNATED: usize = 24;
pub const MAX_BRUTE_FORCE_VERTICES: usize = 10;
/// Iteration budget for faces of nonsmooth custom objectives.
pub const SUPERGRADIENT_ITERATIONS: usize = 20_000;
const VALUE_TIE_TOL: f64 = 1e-12;

/// Actions the evaluator is willing to see effort on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignatedSet(Vec<usize>);

impl DesignatedSet {
    pub fn new(graph: &EffortGraph, actions: &[usize]) -> Result<Self> {
        let mut d = actions.to_vec();
        d.sort_unstable();
        d.dedup();
        if d.is_empty() {
            return Err(Error::EmptySet("designated set"));
        }
        if let Some(&j) = d.iter().find(|&&j| j >= graph.num_actions()) {
            return Err(Error::ActionOutOfRange { index: j, len: graph.num_actions() });
        }
        if d.len() > MAX_DESIGNATED {
            return Err(Error::InstanceTooLarge(format!(
                "designated set has {} actions; at most {MAX_DESIGNATED} are enumerable",
                d.len()
            )));
        }
        Ok(DesignatedSet(d))
    }

    pub fn all(graph: &EffortGraph) -> Result<Self> {
        DesignatedSet::new(graph, &(0..graph.num_actions()).collect::<Vec<_>>())
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn expand(&self, mask: u32) -> Vec<usize> {
        (0..self.0.len()).filter(|k| mask >> k & 1 == 1).map(|k| self.0[k]).collect()
    }
}

/// Undirected graph without self-loops or parallel edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleGraph {
    vertices: Vec<String>,
    edges: Vec<(usize, usize)>,
}

impl SimpleGraph {
    pub fn new<I, S>(vertices: I, edges: &[(usize, usize)]) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let vertices: Vec<String> = vertices.into_iter().map(Into::into).collect();
        for (k, v) in vertices.iter().enumerate() {
            if vertices[..k].contains(v) {
                return Err(Error::InvalidSimpleGraph(format!("duplicate vertex {v}")));
            }
        }
        let n = vertices.len();
        let mut seen = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidSimpleGraph(format!("edge ({a}, {b}) references a missing vertex")));
            }
            if a == b {
                return Err(Error::InvalidSimpleGraph(format!("self-loop at {}", vertices[a])));
            }
            let key = (a.min(b), a.max(b));
            if seen.contains(&key) {
                return Err(Error::InvalidSimpleGraph(format!(
                    "duplicate edge {}-{}",
                    vertices[a], vertices[b]
                )));
            }
            seen.push(key);
        }
        Ok(SimpleGraph { vertices, edges: edges.to_vec() })
    }

    /// Vertices `v0, v1, ...`.
    pub fn numbered(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        SimpleGraph::new((0..n).map(|k| format!("v{k}")), edges)
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        self.edges.iter().all(|(a, b)| !(set.contains(a) && set.contains(b)))
    }
}

/// Vertex actions weigh 3 on their own feature, edge actions 2 on both
/// endpoint features. Identity conversion and unit budget.
///
/// Actions are the vertices in order, then the edges named `u-v`.
/// Features are named `F_u`.
pub fn gadget_from_graph(g: &SimpleGraph) -> EffortGraph {
    let n = g.num_vertices();
    let mut actions = g.vertices.clone();
    actions.extend(g.edges.iter().map(|&(a, b)| format!("{}-{}", g.vertices[a], g.vertices[b])));
    let features = g.vertices.iter().map(|v| Feature::new(format!("F_{v}"), ConcaveFn::identity())).collect();
    let mut weights = vec![vec![int(0); n]; n + g.edges.len()];
    for (v, row) in weights.iter_mut().enumerate().take(n) {
        row[v] = int(3);
    }
    for (k, &(a, b)) in g.edges.iter().enumerate() {
        weights[n + k][a] = int(2);
        weights[n + k][b] = int(2);
    }
    EffortGraph::new_unvalidated(actions, features, weights, int(1)).expect("gadget dimensions are consistent")
}

/// Every independent set including the empty one, as ascending vertex lists
/// ordered by bitmask.
pub fn independent_sets_bruteforce(g: &SimpleGraph) -> Result<Vec<Vec<usize>>> {
    let n = g.num_vertices();
    if n > MAX_BRUTE_FORCE_VERTICES {
        return Err(Error::InstanceTooLarge(format!(
            "{n} vertices; brute force supports at most {MAX_BRUTE_FORCE_VERTICES}"
        )));
    }
    Ok((0u32..1 << n)
        .filter(|mask| g.edges.iter().all(|&(a, b)| mask >> a & 1 == 0 || mask >> b & 1 == 0))
        .map(|mask| (0..n).filter(|v| mask >> v & 1 == 1).collect())
        .collect())
}

fn kappa_is_one(graph: &EffortGraph, set: &[usize]) -> Result<bool> {
    Ok(kappa_of_set(graph, set)?.kappa.is_one())
}

fn evaluate_masks(graph: &EffortGraph, d: &DesignatedSet, masks: Vec<u32>) -> Result<Vec<u32>> {
    let verdicts: Vec<Result<bool>> = masks.par_iter().map(|&mask| kappa_is_one(graph, &d.expand(mask))).collect();
    let mut keep = Vec::new();
    for (mask, verdict) in masks.into_iter().zip(verdicts) {
        if verdict? {
            keep.push(mask);
        }
    }
    Ok(keep)
}

/// Maximal members of a downward-closed family: those with no one-larger superset.
fn maximal_sets(d: &DesignatedSet, mut family: Vec<u32>) -> Vec<Vec<usize>> {
    family.sort_unstable();
    family.dedup();
    let k = d.len();
    let maximal: Vec<u32> = family
        .iter()
        .copied()
        .filter(|&s| (0..k).filter(|b| s >> b & 1 == 0).all(|b| family.binary_search(&(s | 1 << b)).is_err()))
        .collect();
    let mut sets: Vec<Vec<usize>> = maximal.into_iter().map(|mask| d.expand(mask)).collect();
    sets.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    sets
}

/// Maximal `S` within `D` with `kappa_S = 1`, largest first then
/// lexicographic.
///
/// Subsets are visited level by level; a set is tested only when all its
/// one-smaller subsets passed, so no superset of a failing set is ever solved.
pub fn incentivizable_supports(graph: &EffortGraph, d: &DesignatedSet) -> Result<Vec<Vec<usize>>> {
    let k = d.len();
    let mut level = evaluate_masks(graph, d, (0..k).map(|b| 1u32 << b).collect())?;
    let mut family = level.clone();
    while !level.is_empty() {
        let mut candidates = Vec::new();
        for (p, &a) in level.iter().enumerate() {
            for &b in &level[p + 1..] {
                let joined = a | b;
                if joined.count_ones() != a.count_ones() + 1 {
                    continue;
                }
                let all_subsets_pass = (0..k)
                    .filter(|bit| joined >> bit & 1 == 1)
                    .all(|bit| level.binary_search(&(joined & !(1 << bit))).is_ok());
                if all_subsets_pass {
                    candidates.push(joined);
                }
            }
        }
        candidates.sort_unstable();
        candidates.dedup();
        level = evaluate_masks(graph, d, candidates)?;
        level.sort_unstable();
        family.extend_from_slice(&level);
    }
    Ok(maximal_sets(d, family))
}

/// [`incentivizable_supports`] without pruning: solves every nonempty subset.
pub fn incentivizable_supports_exhaustive(graph: &EffortGraph, d: &DesignatedSet) -> Result<Vec<Vec<usize>>> {
    let family = evaluate_masks(graph, d, (1u32..1 << d.len()).collect())?;
    Ok(maximal_sets(d, family))
}

/// An externally supplied concave objective on effort profiles.
pub trait ConcaveObjective: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn supergradient(&self, x: &[f64]) -> Vec<f64>;
    /// Smooth objectives are maximized by projected gradient ascent, others by
    /// projected supergradient ascent.
    fn is_smooth(&self) -> bool {
        false
    }
}

#[derive(Clone)]
pub enum Objective {
    /// `w^T x`.
    Dot(Vec<f64>),
    /// `-|x - t|^2`.
    NegSqDist(Vec<f64>),
    /// `min_{j in D} w_j x_j` with `w` indexed by action.
    WeightedMin(Vec<f64>),
    /// `-sum x_j ln x_j`.
    Entropy,
    /// Support size, maximized with the effort spread evenly.
    Cardinality,
    Custom(Arc<dyn ConcaveObjective>),
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Dot(w) => f.debug_tuple("Dot").field(w).finish(),
            Objective::NegSqDist(t) => f.debug_tuple("NegSqDist").field(t).finish(),
            Objective::WeightedMin(w) => f.debug_tuple("WeightedMin").field(w).finish(),
            Objective::Entropy => f.write_str("Entropy"),
            Objective::Cardinality => f.write_str("Cardinality"),
            Objective::Custom(_) => f.write_str("Custom"),
        }
    }
}

fn entropy(x: &[f64]) -> f64 {
    -x.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

impl Objective {
    fn check(&self, m: usize) -> Result<()> {
        let (what, v) = match self {
            Objective::Dot(w) => ("dot objective", w),
            Objective::NegSqDist(t) => ("target profile", t),
            Objective::WeightedMin(w) => ("weighted-min objective", w),
            _ => return Ok(()),
        };
        if v.len() != m {
            return Err(Error::DimensionMismatch { what, expected: m, found: v.len() });
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidProfile(format!("{what} has a non-finite entry")));
        }
        if matches!(self, Objective::WeightedMin(_)) && v.iter().any(|c| *c < 0.0) {
            return Err(Error::InvalidProfile("weighted-min weights must be nonnegative".into()));
        }
        Ok(())
    }

    /// Objective value at `x`; `designated` matters only for weighted min.
    pub fn value(&self, x: &[f64], designated: &[usize]) -> f64 {
        match self {
            Objective::Dot(w) => w.iter().zip(x).map(|(a, b)| a * b).sum(),
            Objective::NegSqDist(t) => -t.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
            Objective::WeightedMin(w) => designated.iter().map(|&j| w[j] * x[j]).fold(f64::INFINITY, f64::min),
            Objective::Entropy => entropy(x),
            Objective::Cardinality => x.iter().filter(|v| **v > 0.0).count() as f64,
            Objective::Custom(g) => g.value(x),
        }
    }

    /// Closed-form maximizer over `{x : S(x) within face, sum(x) = total}`.
    fn face_maximizer(&self, m: usize, face: &[usize], total: f64) -> Option<Vec<f64>> {
        let mut x = vec![0.0; m];
        match self {
            Objective::Dot(w) => {
                let best = face.iter().copied().fold(face[0], |a, j| if w[j] > w[a] { j } else { a });
                x[best] = total;
            }
            Objective::NegSqDist(t) => {
                let target: Vec<f64> = face.iter().map(|&j| t[j]).collect();
                for (&j, v) in face.iter().zip(simplex::project_onto_simplex(&target, total)) {
                    x[j] = v;
                }
            }
            Objective::WeightedMin(w) => {
                // Equalize w_j x_j over the face; zero weights take no effort unless all are zero.
                let inv: f64 = face.iter().filter(|&&j| w[j] > 0.0).map(|&j| 1.0 / w[j]).sum();
                if inv > 0.0 {
                    for &j in face.iter().filter(|&&j| w[j] > 0.0) {
                        x[j] = total / (w[j] * inv);
                    }
                } else {
                    for &j in face {
                        x[j] = total / face.len() as f64;
                    }
                }
            }
            Objective::Entropy | Objective::Cardinality => {
                for &j in face {
                    x[j] = total / face.len() as f64;
                }
            }
            Objective::Custom(_) => return None,
        }
        Some(x)
    }
}

/// Maximizes a custom objective over one face by the iterative solvers.
pub fn maximize_on_face(g: &dyn ConcaveObjective, m: usize, face: &[usize], total: f64) -> (Vec<f64>, f64) {
    let embed = |y: &[f64]| {
        let mut x = vec![0.0; m];
        for (&j, &v) in face.iter().zip(y) {
            x[j] = v;
        }
        x
    };
    let eval = |y: &[f64]| {
        let x = embed(y);
        let full = g.supergradient(&x);
        (g.value(&x), face.iter().map(|&j| full[j]).collect::<Vec<f64>>())
    };
    let start = vec![total / face.len() as f64; face.len()];
    let y = if g.is_smooth() {
        simplex::projected_ascent(start, total, AscentConfig::default(), eval, |grad| {
            grad.iter().map(|v| v.abs()).fold(0.0, f64::max)
        })
        .x
    } else {
        simplex::projected_supergradient(start, total, SUPERGRADIENT_ITERATIONS, eval).0
    };
    let x = embed(&y);
    let v = g.value(&x);
    (x, v)
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub x_star: EffortProfile,
    pub beta: LinearMechanism,
    pub value: f64,
    /// The maximal incentivizable support whose face won.
    pub face: Vec<usize>,
    /// All maximal incentivizable supports inside `D`.
    pub supports: Vec<Vec<usize>>,
    pub synthesis: SynthesisResult,
    pub kkt: KktReport,
}

/// Maximizes `g` over profiles incentivizable with support inside `D`.
///
/// One concave maximization runs per maximal incentivizable support; faces
/// with equal values go to the larger support, then the lexicographically
/// smaller one. The winner is cleaned of negligible entries and a mechanism
/// incentivizing it is synthesized.
pub fn optimize_profile(graph: &EffortGraph, d: &DesignatedSet, g: &Objective) -> Result<OptimizationResult> {
    let m = graph.num_actions();
    g.check(m)?;
    if !feasible_designated(graph, d.actions())?.feasible {
        return Err(Error::InfeasibleDesignatedSet);
    }
    let supports = incentivizable_supports(graph, d)?;
    let total = graph.budget_f64();

    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    for (k, face) in supports.iter().enumerate() {
        let x = match (g, g.face_maximizer(m, face, total)) {
            (_, Some(x)) => x,
            (Objective::Custom(custom), None) => maximize_on_face(custom.as_ref(), m, face, total).0,
            (_, None) => unreachable!("built-in objectives have closed-form face maximizers"),
        };
        let value = g.value(&x, d.actions());
        let better = match &best {
            None => true,
            Some((_, v, _)) => value > v + VALUE_TIE_TOL * v.abs().max(1.0),
        };
        if better {
            best = Some((k, value, x));
        }
    }
    let (k, _, x) = best.expect("a feasible designated set has an incentivizable support");
    let cleaned = clean_support(&x, total);
    let value = g.value(&cleaned, d.actions());
    let x_star = EffortProfile::new(cleaned)?;
    let synthesis = synthesize(graph, &x_star)?;
    let kkt = kkt_verify(graph, &synthesis.beta, &x_star)?;
    Ok(OptimizationResult {
        x_star,
        beta: synthesis.beta.clone(),
        value,
        face: supports[k].clone(),
        supports,
        synthesis,
        kkt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    fn path3() -> SimpleGraph {
        SimpleGraph::new(["u", "v", "w"], &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn gadget_shapes() {
        let k2 = gadget_from_graph(&SimpleGraph::new(["u", "v"], &[(0, 1)]).unwrap());
        assert_eq!(k2.num_actions(), 3);
        assert_eq!(k2.num_features(), 2);
        assert_eq!(k2.actions(), &["u", "v", "u-v"]);
        assert_eq!(k2.weight(0, 0), &int(3));
        assert_eq!(k2.weight(2, 0), &int(2));
        assert_eq!(k2.weight(2, 1), &int(2));
        assert_eq!(k2.weight(0, 1), &int(0));
        let k3 = gadget_from_graph(&SimpleGraph::numbered(3, &[(0, 1), (1, 2), (0, 2)]).unwrap());
        assert_eq!(k3.num_actions(), 6);
    }

    #[test]
    fn simple_graph_validation() {
        assert!(SimpleGraph::new(["u"], &[(0, 0)]).is_err());
        assert!(SimpleGraph::new(["u", "v"], &[(0, 1), (1, 0)]).is_err());
        assert!(SimpleGraph::new(["u", "v"], &[(0, 2)]).is_err());
        assert!(SimpleGraph::new(["u", "u"], &[]).is_err());
    }

    #[test]
    fn brute_force_independent_sets() {
        let p = path3();
        let sets = independent_sets_bruteforce(&p).unwrap();
        assert_eq!(sets, vec![vec![], vec![0], vec![1], vec![2], vec![0, 2]]);
        let k3 = SimpleGraph::numbered(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(independent_sets_bruteforce(&k3).unwrap().len(), 4);
        assert!(independent_sets_bruteforce(&SimpleGraph::numbered(11, &[]).unwrap()).is_err());
    }

    #[test]
    fn supports_of_small_gadgets() {
        let k2 = gadget_from_graph(&SimpleGraph::new(["u", "v"], &[(0, 1)]).unwrap());
        let d = DesignatedSet::new(&k2, &[0, 1]).unwrap();
        assert_eq!(incentivizable_supports(&k2, &d).unwrap(), vec![vec![0], vec![1]]);

        let p = gadget_from_graph(&path3());
        let d = DesignatedSet::new(&p, &[0, 1, 2]).unwrap();
        assert_eq!(incentivizable_supports(&p, &d).unwrap(), vec![vec![0, 2], vec![1]]);

        let c = scenarios::classroom();
        let d = DesignatedSet::new(&c, &[1]).unwrap();
        assert_eq!(incentivizable_supports(&c, &d).unwrap(), vec![vec![1]]);
    }

    #[test]
    fn pruned_matches_exhaustive_on_fixtures() {
        for g in [scenarios::classroom(), scenarios::nonconvex(), gadget_from_graph(&path3())] {
            let d = DesignatedSet::all(&g).unwrap();
            assert_eq!(
                incentivizable_supports(&g, &d).unwrap(),
                incentivizable_supports_exhaustive(&g, &d).unwrap()
            );
        }
    }

    #[test]
    fn cardinality_on_path() {
        let g = gadget_from_graph(&path3());
        let d = DesignatedSet::new(&g, &[0, 1, 2]).unwrap();
        let r = optimize_profile(&g, &d, &Objective::Cardinality).unwrap();
        assert_eq!(r.face, vec![0, 2]);
        assert_eq!(r.value, 2.0);
        assert!(r.kkt.verdict);
    }

    #[test]
    fn weighted_min_tie_break() {
        let g = gadget_from_graph(&path3());
        let d = DesignatedSet::new(&g, &[0, 1, 2]).unwrap();
        let r = optimize_profile(&g, &d, &Objective::WeightedMin(vec![1.0; 5])).unwrap();
        assert_eq!(r.face, vec![0, 2]);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn dot_on_path_attains_budget() {
        let g = gadget_from_graph(&path3());
        let d = DesignatedSet::new(&g, &[0, 1, 2]).unwrap();
        let r = optimize_profile(&g, &d, &Objective::Dot(vec![1.0, 1.0, 1.0, 0.0, 0.0])).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn target_on_feasible_face() {
        let g = scenarios::nonconvex();
        let d = DesignatedSet::new(&g, &[0, 2]).unwrap();
        let t = vec![1.0 / 3.0, 0.0, 2.0 / 3.0, 0.0];
        let r = optimize_profile(&g, &d, &Objective::NegSqDist(t.clone())).unwrap();
        assert!(r.value.abs() < 1e-12);
        for (a, b) in r.x_star.values().iter().zip(&t) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn infeasible_designated() {
        let g = scenarios::classroom_weak();
        let d = DesignatedSet::new(&g, &[1]).unwrap();
        assert!(matches!(optimize_profile(&g, &d, &Objective::Entropy), Err(Error::InfeasibleDesignatedSet)));
    }

    struct Smooth;
    impl ConcaveObjective for Smooth {
        fn value(&self, x: &[f64]) -> f64 {
            x.iter().enumerate().map(|(j, v)| ((j + 1) as f64 * v).ln_1p()).sum()
        }
        fn supergradient(&self, x: &[f64]) -> Vec<f64> {
            x.iter().enumerate().map(|(j, v)| (j + 1) as f64 / (1.0 + (j + 1) as f64 * v)).collect()
        }
        fn is_smooth(&self) -> bool {
            true
        }
    }

    #[test]
    fn custom_objective_runs_iteratively() {
        let g = scenarios::nonconvex();
        let d = DesignatedSet::new(&g, &[0, 2]).unwrap();
        let r = optimize_profile(&g, &d, &Objective::Custom(Arc::new(Smooth))).unwrap();
        // ln(1 + x) + ln(1 + 3y) on x + y = 1 peaks at x = 1/6.
        assert!((r.x_star.values()[0] - 1.0 / 6.0).abs() < 1e-6, "{:?}", r.x_star);
        assert!(r.kkt.verdict);
    }

    #[test]
    fn designated_set_validation() {
        let g = scenarios::classroom();
        assert!(DesignatedSet::new(&g, &[]).is_err());
        assert!(DesignatedSet::new(&g, &[3]).is_err());
        assert_eq!(DesignatedSet::new(&g, &[2, 0, 2]).unwrap().actions(), &[0, 2]);
    }
}
