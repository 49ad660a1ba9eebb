//! Dense two-phase primal simplex over exact rationals.
//!
//! Pivoting follows Bland's rule (lowest-index entering column, lowest-index
//! basic variable on ratio ties), so solves never cycle and are bit-for-bit
//! deterministic. Every optimal solution carries a dual vector `y` with
//! `b^T y` equal to the optimal value.
//!
//! Dual sign convention, per row sense:
//!
//! | objective | `<=` row | `>=` row | `=` row |
//! |-----------|----------|----------|---------|
//! | minimize  | `y <= 0` | `y >= 0` | free    |
//! | maximize  | `y >= 0` | `y <= 0` | free    |
//!
//! and `A^T y <= c` when minimizing, `A^T y >= c` when maximizing.

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<Rational>,
    pub sense: RowSense,
    pub rhs: Rational,
}

/// `opt c^T x` subject to the rows, with `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Objective,
    pub costs: Vec<Rational>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal value; zero unless `status` is `Optimal`.
    pub value: Rational,
    pub primal: Vec<Rational>,
    pub dual: Vec<Rational>,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn new(objective: Objective, costs: Vec<Rational>) -> Self {
        LinearProgram { objective, costs, rows: Vec::new() }
    }

    pub fn minimize(costs: Vec<Rational>) -> Self {
        Self::new(Objective::Minimize, costs)
    }

    pub fn maximize(costs: Vec<Rational>) -> Self {
        Self::new(Objective::Maximize, costs)
    }

    pub fn num_vars(&self) -> usize {
        self.costs.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<Rational>, sense: RowSense, rhs: Rational) -> Result<()> {
        if coeffs.len() != self.num_vars() {
            return Err(Error::DimensionMismatch {
                what: "constraint row",
                expected: self.num_vars(),
                found: coeffs.len(),
            });
        }
        self.rows.push(Row { coeffs, sense, rhs });
        Ok(())
    }

    pub fn with_row(mut self, coeffs: Vec<Rational>, sense: RowSense, rhs: Rational) -> Result<Self> {
        self.add_row(coeffs, sense, rhs)?;
        Ok(self)
    }

    pub fn solve(&self) -> LpSolution {
        let solution = Tableau::build(self).run();
        debug_assert!(
            solution.status != LpStatus::Optimal || certificate_holds(self, &solution),
            "simplex produced an invalid optimality certificate"
        );
        solution
    }
}

/// Exact primal feasibility, dual feasibility (with the sign convention in the
/// module docs) and `c^T x = b^T y`.
pub fn certificate_holds(lp: &LinearProgram, sol: &LpSolution) -> bool {
    if sol.status != LpStatus::Optimal
        || sol.primal.len() != lp.num_vars()
        || sol.dual.len() != lp.rows.len()
    {
        return false;
    }
    if sol.primal.iter().any(|x| x.is_negative()) {
        return false;
    }
    let maximize = lp.objective == Objective::Maximize;
    for (row, y) in lp.rows.iter().zip(&sol.dual) {
        let lhs: Rational = row.coeffs.iter().zip(&sol.primal).map(|(a, x)| a * x).sum();
        let primal_ok = match row.sense {
            RowSense::Le => lhs <= row.rhs,
            RowSense::Ge => lhs >= row.rhs,
            RowSense::Eq => lhs == row.rhs,
        };
        let sign_ok = match (row.sense, maximize) {
            (RowSense::Eq, _) => true,
            (RowSense::Le, false) | (RowSense::Ge, true) => !y.is_positive(),
            (RowSense::Ge, false) | (RowSense::Le, true) => !y.is_negative(),
        };
        if !primal_ok || !sign_ok {
            return false;
        }
    }
    for (k, c) in lp.costs.iter().enumerate() {
        let aty: Rational = lp.rows.iter().zip(&sol.dual).map(|(r, y)| &r.coeffs[k] * y).sum();
        let ok = if maximize { aty >= *c } else { aty <= *c };
        if !ok {
            return false;
        }
    }
    let primal_value: Rational = lp.costs.iter().zip(&sol.primal).map(|(c, x)| c * x).sum();
    let dual_value: Rational = lp.rows.iter().zip(&sol.dual).map(|(r, y)| &r.rhs * y).sum();
    primal_value == sol.value && dual_value == sol.value
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColumnKind {
    Structural,
    Slack,
    Artificial,
}

/// Expanded row in standard form: `Le`/`Ge` only, nonnegative rhs.
struct StdRow {
    origin: usize,
    // +1 or -1: how the original row was multiplied.
    sign: i8,
    sense: RowSense,
}

struct Tableau {
    n_structural: usize,
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    kinds: Vec<ColumnKind>,
    // Column holding the initial identity entry of each row.
    identity_col: Vec<usize>,
    std_rows: Vec<StdRow>,
    n_orig_rows: usize,
    costs: Vec<Rational>,
    maximize: bool,
    pivots: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        let n = lp.num_vars();
        // Equalities become a <= / >= pair.
        let mut expanded: Vec<(usize, RowSense)> = Vec::new();
        for (i, row) in lp.rows.iter().enumerate() {
            match row.sense {
                RowSense::Eq => {
                    expanded.push((i, RowSense::Le));
                    expanded.push((i, RowSense::Ge));
                }
                s => expanded.push((i, s)),
            }
        }
        let mut std_rows = Vec::with_capacity(expanded.len());
        for &(origin, sense) in &expanded {
            let negate = lp.rows[origin].rhs.is_negative();
            let sense = match (sense, negate) {
                (RowSense::Le, true) => RowSense::Ge,
                (RowSense::Ge, true) => RowSense::Le,
                (s, _) => s,
            };
            std_rows.push(StdRow { origin, sign: if negate { -1 } else { 1 }, sense });
        }
        let n_slack = std_rows.len();
        let n_art = std_rows.iter().filter(|r| r.sense == RowSense::Ge).count();
        let width = n + n_slack + n_art;
        let mut kinds = vec![ColumnKind::Structural; n];
        kinds.extend(std::iter::repeat(ColumnKind::Slack).take(n_slack));
        kinds.extend(std::iter::repeat(ColumnKind::Artificial).take(n_art));

        let mut rows = Vec::with_capacity(std_rows.len());
        let mut rhs = Vec::with_capacity(std_rows.len());
        let mut basis = Vec::with_capacity(std_rows.len());
        let mut identity_col = Vec::with_capacity(std_rows.len());
        let mut next_art = n + n_slack;
        for (r, sr) in std_rows.iter().enumerate() {
            let src = &lp.rows[sr.origin];
            let mut row = vec![Rational::zero(); width];
            for (k, a) in src.coeffs.iter().enumerate() {
                if !a.is_zero() {
                    row[k] = if sr.sign < 0 { -a.clone() } else { a.clone() };
                }
            }
            rhs.push(if sr.sign < 0 { -src.rhs.clone() } else { src.rhs.clone() });
            match sr.sense {
                RowSense::Le => {
                    row[n + r] = Rational::one();
                    basis.push(n + r);
                    identity_col.push(n + r);
                }
                _ => {
                    row[n + r] = -Rational::one();
                    row[next_art] = Rational::one();
                    basis.push(next_art);
                    identity_col.push(next_art);
                    next_art += 1;
                }
            }
            rows.push(row);
        }
        let maximize = lp.objective == Objective::Maximize;
        let mut costs = vec![Rational::zero(); width];
        for (k, c) in lp.costs.iter().enumerate() {
            costs[k] = if maximize { -c.clone() } else { c.clone() };
        }
        Tableau {
            n_structural: n,
            rows,
            rhs,
            basis,
            kinds,
            identity_col,
            std_rows,
            n_orig_rows: lp.rows.len(),
            costs,
            maximize,
            pivots: 0,
        }
    }

    fn width(&self) -> usize {
        self.kinds.len()
    }

    fn reduced_costs(&self, costs: &[Rational]) -> Vec<Rational> {
        let mut d = costs.to_vec();
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = &costs[b];
            if cb.is_zero() {
                continue;
            }
            for (dk, a) in d.iter_mut().zip(row) {
                if !a.is_zero() {
                    *dk -= cb * a;
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, e: usize, d: &mut [Rational]) {
        let inv = self.rows[r][e].recip();
        if !inv.is_one() {
            for a in self.rows[r].iter_mut() {
                if !a.is_zero() {
                    *a *= &inv;
                }
            }
            self.rhs[r] *= &inv;
        }
        let pivot_row = std::mem::take(&mut self.rows[r]);
        let pivot_rhs = self.rhs[r].clone();
        let nz: Vec<usize> = (0..pivot_row.len()).filter(|&k| !pivot_row[k].is_zero()).collect();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[e].is_zero() {
                continue;
            }
            let factor = row[e].clone();
            for &k in &nz {
                row[k] -= &factor * &pivot_row[k];
            }
            self.rhs[i] -= &factor * &pivot_rhs;
        }
        if !d[e].is_zero() {
            let factor = d[e].clone();
            for &k in &nz {
                d[k] -= &factor * &pivot_row[k];
            }
        }
        self.rows[r] = pivot_row;
        self.basis[r] = e;
        self.pivots += 1;
    }

    /// Runs Bland pivots on reduced costs `d`; returns false when unbounded.
    fn optimize(&mut self, d: &mut [Rational], allow: impl Fn(ColumnKind) -> bool) -> bool {
        loop {
            let entering = (0..self.width()).find(|&k| allow(self.kinds[k]) && d[k].is_negative());
            let Some(e) = entering else {
                return true;
            };
            let mut leave: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][e];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / a;
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, e, d),
                None => return false,
            }
        }
    }

    fn run(mut self) -> LpSolution {
        let width = self.width();
        let has_art = self.kinds.contains(&ColumnKind::Artificial);
        if has_art {
            let phase1: Vec<Rational> = self
                .kinds
                .iter()
                .map(|k| if *k == ColumnKind::Artificial { Rational::one() } else { Rational::zero() })
                .collect();
            let mut d = self.reduced_costs(&phase1);
            // Phase one is bounded below by zero.
            self.optimize(&mut d, |_| true);
            let infeasibility: Rational = self
                .basis
                .iter()
                .zip(&self.rhs)
                .filter(|(b, _)| self.kinds[**b] == ColumnKind::Artificial)
                .map(|(_, v)| v.clone())
                .sum();
            if infeasibility.is_positive() {
                return self.terminal(LpStatus::Infeasible);
            }
            // Drive zero-level artificials out of the basis where possible.
            for r in 0..self.rows.len() {
                if self.kinds[self.basis[r]] != ColumnKind::Artificial {
                    continue;
                }
                let col = (0..width).find(|&k| {
                    self.kinds[k] != ColumnKind::Artificial && !self.rows[r][k].is_zero()
                });
                if let Some(e) = col {
                    let mut scratch = vec![Rational::zero(); width];
                    self.pivot(r, e, &mut scratch);
                }
            }
        }
        let costs = self.costs.clone();
        let mut d = self.reduced_costs(&costs);
        if !self.optimize(&mut d, |k| k != ColumnKind::Artificial) {
            return self.terminal(LpStatus::Unbounded);
        }

        let mut primal = vec![Rational::zero(); self.n_structural];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < self.n_structural {
                primal[b] = self.rhs[r].clone();
            }
        }
        // Standard-form dual of row r is c_B^T B^-1 e_r = -(reduced cost of its identity column).
        let mut dual = vec![Rational::zero(); self.n_orig_rows];
        for (r, sr) in self.std_rows.iter().enumerate() {
            let mut y = -d[self.identity_col[r]].clone();
            if sr.sign < 0 {
                y = -y;
            }
            dual[sr.origin] += y;
        }
        let mut value: Rational = costs.iter().zip(&primal).map(|(c, x)| c * x).sum();
        if self.maximize {
            value = -value;
            for y in dual.iter_mut() {
                *y = -y.clone();
            }
        }
        LpSolution { status: LpStatus::Optimal, value, primal, dual, pivots: self.pivots }
    }

    fn terminal(self, status: LpStatus) -> LpSolution {
        LpSolution {
            status,
            value: Rational::zero(),
            primal: Vec::new(),
            dual: Vec::new(),
            pivots: self.pivots,
        }
    }
}
