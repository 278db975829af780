//! Dense two-phase simplex with Bland's rule, and an exhaustive
//! vertex-enumeration oracle for small instances.
//!
//! Problems are stated as `min c.x` subject to rows `a.x (<=|>=|=) b` and
//! per-variable bounds in the extended reals. Internally every variable is
//! shifted, reflected or split so that the tableau only sees nonnegative
//! columns.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub row: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(row: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Self { row, relation, rhs }
    }

    /// Signed violation of the row at `x` (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs: f64 = self.row.iter().zip(x).map(|(a, v)| a * v).sum();
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `min objective.x` subject to `constraints` and `lower <= x <= upper`.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// New program with every variable bounded to `[0, +inf)`.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            constraints: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, row: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint::new(row, relation, rhs));
        self
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[j] = lower;
        self.upper[j] = upper;
        self
    }

    pub fn set_free(&mut self, j: usize) -> &mut Self {
        self.set_bounds(j, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if n == 0 {
            return Err(LpError::Invalid("program has no variables".into()));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::DimensionMismatch {
                what: "bounds",
                expected: n,
                got: self.lower.len().min(self.upper.len()),
            });
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::Invalid("non-finite objective coefficient".into()));
        }
        for (k, c) in self.constraints.iter().enumerate() {
            if c.row.len() != n {
                return Err(LpError::DimensionMismatch {
                    what: "constraint row",
                    expected: n,
                    got: c.row.len(),
                });
            }
            if c.row.iter().any(|v| !v.is_finite()) || !c.rhs.is_finite() {
                return Err(LpError::Invalid(format!("non-finite entry in constraint {k}")));
            }
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() {
                return Err(LpError::Invalid(format!("NaN bound on variable {j}")));
            }
            if self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(LpError::Invalid(format!("empty bound interval on variable {j}")));
            }
        }
        Ok(())
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| c.violation(x));
        let bounds = (0..self.num_vars()).map(|j| {
            (self.lower[j] - x[j]).max(x[j] - self.upper[j]).max(0.0)
        });
        rows.chain(bounds).fold(0.0, f64::max)
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Empty unless `status == Optimal`.
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub max_constraint_violation: f64,
    pub pivots: usize,
}

impl LpSolution {
    fn without_point(status: LpStatus, pivots: usize) -> Self {
        let objective_value = match status {
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        };
        Self {
            status,
            x: Vec::new(),
            objective_value,
            max_constraint_violation: f64::NAN,
            pivots,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("invalid program: {0}")]
    Invalid(String),
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("simplex hit the iteration cap of {limit} pivots")]
    IterationLimit { limit: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("size cap exceeded: {0}")]
    SizeCap(String),
}

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    pub feas_tol: f64,
    pub pivot_tol: f64,
    /// Defaults to `50 * (rows + cols)` of the internal standard form.
    pub max_pivots: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            pivot_tol: 1e-10,
            max_pivots: None,
        }
    }
}

/// Solves with default tolerances.
pub fn lp_solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp_solve_with(lp, &SimplexOptions::default())
}

#[derive(Clone, Copy, Debug)]
enum VarMap {
    /// `x = lo + x'`
    Shift { col: usize, lo: f64 },
    /// `x = hi - x'`
    Reflect { col: usize, hi: f64 },
    /// `x = x'_pos - x'_neg`
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    relation: Vec<Relation>,
    cost: Vec<f64>,
    maps: Vec<VarMap>,
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> Option<Self> {
        let mut maps = Vec::with_capacity(lp.num_vars());
        let mut ncols = 0;
        let mut extra_upper = Vec::new();
        for j in 0..lp.num_vars() {
            let (lo, hi) = (lp.lower[j], lp.upper[j]);
            if lo > hi {
                return None;
            }
            let map = if lo.is_finite() {
                if hi.is_finite() {
                    extra_upper.push((ncols, hi - lo));
                }
                VarMap::Shift { col: ncols, lo }
            } else if hi.is_finite() {
                VarMap::Reflect { col: ncols, hi }
            } else {
                ncols += 1;
                VarMap::Split { pos: ncols - 1, neg: ncols }
            };
            ncols += 1;
            maps.push(map);
        }

        let translate = |coeffs: &[f64]| -> (Vec<f64>, f64) {
            let mut out = vec![0.0; ncols];
            let mut offset = 0.0;
            for (j, &a) in coeffs.iter().enumerate() {
                match maps[j] {
                    VarMap::Shift { col, lo } => {
                        out[col] = a;
                        offset += a * lo;
                    }
                    VarMap::Reflect { col, hi } => {
                        out[col] = -a;
                        offset += a * hi;
                    }
                    VarMap::Split { pos, neg } => {
                        out[pos] = a;
                        out[neg] = -a;
                    }
                }
            }
            (out, offset)
        };

        let (cost, _) = translate(&lp.objective);
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        let mut relation = Vec::new();
        for c in &lp.constraints {
            let (row, offset) = translate(&c.row);
            rows.push(row);
            rhs.push(c.rhs - offset);
            relation.push(c.relation);
        }
        for (col, width) in extra_upper {
            let mut row = vec![0.0; ncols];
            row[col] = 1.0;
            rows.push(row);
            rhs.push(width);
            relation.push(Relation::Le);
        }
        // nonnegative right-hand sides
        for i in 0..rows.len() {
            if rhs[i] < 0.0 {
                rhs[i] = -rhs[i];
                rows[i].iter_mut().for_each(|v| *v = -*v);
                relation[i] = match relation[i] {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
        }
        Some(Self {
            rows,
            rhs,
            relation,
            cost,
            maps,
        })
    }

    fn recover(&self, xs: &[f64]) -> Vec<f64> {
        self.maps
            .iter()
            .map(|m| match *m {
                VarMap::Shift { col, lo } => lo + xs[col],
                VarMap::Reflect { col, hi } => hi - xs[col],
                VarMap::Split { pos, neg } => xs[pos] - xs[neg],
            })
            .collect()
    }
}

struct Tableau {
    /// Constraint rows; the last entry of each row is the right-hand side.
    rows: Vec<Vec<f64>>,
    /// Reduced costs; the last entry is minus the objective value.
    obj: Vec<f64>,
    basis: Vec<usize>,
    /// Index of the original standard-form row held by each tableau row.
    origin: Vec<usize>,
    n_struct: usize,
    n_real: usize,
    n_total: usize,
    pivots: usize,
    max_pivots: usize,
    pivot_tol: f64,
    cost_tol: f64,
}

enum Phase {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.n_total]
    }

    fn pivot(&mut self, p: usize, e: usize) {
        let w = self.n_total + 1;
        let inv = 1.0 / self.rows[p][e];
        for v in self.rows[p].iter_mut() {
            *v *= inv;
        }
        self.rows[p][e] = 1.0;
        let prow = std::mem::take(&mut self.rows[p]);
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == p {
                continue;
            }
            let f = row[e];
            if f != 0.0 {
                for k in 0..w {
                    row[k] -= f * prow[k];
                }
                row[e] = 0.0;
            }
        }
        let f = self.obj[e];
        if f != 0.0 {
            for k in 0..w {
                self.obj[k] -= f * prow[k];
            }
            self.obj[e] = 0.0;
        }
        self.rows[p] = prow;
        self.basis[p] = e;
        self.pivots += 1;
    }

    /// Runs Bland's rule over columns `< allowed`.
    fn run(&mut self, allowed: usize) -> Result<Phase, LpError> {
        loop {
            let entering = (0..allowed).find(|&j| self.obj[j] < -self.cost_tol);
            let Some(e) = entering else {
                return Ok(Phase::Optimal);
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][e];
                if a > self.pivot_tol {
                    let ratio = self.rhs(i).max(0.0) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * br.abs().max(1.0);
                            if ratio < br && !tie {
                                Some((i, ratio))
                            } else if tie && self.basis[i] < self.basis[bi] {
                                Some((i, ratio.min(br)))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((p, _)) = best else {
                return Ok(Phase::Unbounded);
            };
            if self.pivots >= self.max_pivots {
                return Err(LpError::IterationLimit {
                    limit: self.max_pivots,
                });
            }
            self.pivot(p, e);
            for row in self.rows.iter_mut() {
                let b = &mut row[self.n_total];
                if *b < 0.0 && *b > -1e-11 {
                    *b = 0.0;
                }
            }
        }
    }

    fn set_objective(&mut self, cost: &[f64]) {
        let w = self.n_total + 1;
        self.obj = vec![0.0; w];
        self.obj[..cost.len()].copy_from_slice(cost);
        for i in 0..self.rows.len() {
            let cb = if self.basis[i] < cost.len() { cost[self.basis[i]] } else { 0.0 };
            if cb != 0.0 {
                for k in 0..w {
                    self.obj[k] -= cb * self.rows[i][k];
                }
            }
        }
    }
}

/// Two-phase simplex with Bland's anti-cycling rule.
pub fn lp_solve_with(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let Some(sf) = StandardForm::build(lp) else {
        return Ok(LpSolution::without_point(LpStatus::Infeasible, 0));
    };
    let m = sf.rows.len();
    let n_struct = sf.cost.len();
    let n_slack = sf.relation.iter().filter(|r| **r != Relation::Eq).count();
    let n_art = sf.relation.iter().filter(|r| **r != Relation::Le).count();
    let n_real = n_struct + n_slack;
    let n_total = n_real + n_art;
    let max_pivots = opts.max_pivots.unwrap_or(50 * (m + n_total));

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let (mut next_slack, mut next_art) = (n_struct, n_real);
    for i in 0..m {
        let mut row = vec![0.0; n_total + 1];
        row[..n_struct].copy_from_slice(&sf.rows[i]);
        row[n_total] = sf.rhs[i];
        match sf.relation[i] {
            Relation::Le => {
                row[next_slack] = 1.0;
                basis.push(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                row[next_slack] = -1.0;
                next_slack += 1;
                row[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                row[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
        }
        rows.push(row);
    }
    // columns of the real (non-artificial) part, kept for the final re-solve
    let original: Vec<Vec<f64>> = rows.iter().map(|r| {
        let mut v = r[..n_real].to_vec();
        v.push(r[n_total]);
        v
    }).collect();

    let cost_scale = sf.cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
    let mut tab = Tableau {
        rows,
        obj: Vec::new(),
        basis,
        origin: (0..m).collect(),
        n_struct,
        n_real,
        n_total,
        pivots: 0,
        max_pivots,
        pivot_tol: opts.pivot_tol,
        cost_tol: 1e-9,
    };

    if n_art > 0 {
        let mut phase1 = vec![0.0; n_total];
        phase1[n_real..].iter_mut().for_each(|v| *v = 1.0);
        tab.set_objective(&phase1);
        tab.run(n_total)?;
        let infeasibility = -tab.obj[n_total];
        let bmax = sf.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if infeasibility > opts.feas_tol * (1.0 + bmax) {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, tab.pivots));
        }
        // drive artificials out of the basis; drop rows that are redundant
        let mut i = 0;
        while i < tab.rows.len() {
            if tab.basis[i] >= n_real {
                let col = (0..n_real)
                    .filter(|&j| tab.rows[i][j].abs() > opts.pivot_tol)
                    .max_by(|&a, &b| tab.rows[i][a].abs().total_cmp(&tab.rows[i][b].abs()));
                match col {
                    Some(j) => tab.pivot(i, j),
                    None => {
                        tab.rows.remove(i);
                        tab.basis.remove(i);
                        tab.origin.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    tab.cost_tol = 1e-9 * cost_scale;
    let mut cost = sf.cost.clone();
    cost.resize(n_total, 0.0);
    tab.set_objective(&cost);
    match tab.run(n_real)? {
        Phase::Unbounded => return Ok(LpSolution::without_point(LpStatus::Unbounded, tab.pivots)),
        Phase::Optimal => {}
    }

    let mut xs = vec![0.0; n_real];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n_real {
            xs[b] = tab.rhs(i).max(0.0);
        }
    }
    if let Some(refined) = resolve_basis(&tab, &original) {
        xs = refined;
    }
    let x = sf.recover(&xs[..tab.n_struct]);
    let violation = lp.max_violation(&x);
    let scale = 1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if violation > opts.feas_tol * scale {
        return Err(LpError::Numerical(format!(
            "optimal basis violates constraints by {violation:.3e}"
        )));
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: lp.objective_at(&x),
        x,
        max_constraint_violation: violation,
        pivots: tab.pivots,
    })
}

/// Recomputes basic values from the original rows to shed accumulated
/// round-off. Returns `None` if the basis matrix is singular or the result
/// is not primal feasible.
fn resolve_basis(tab: &Tableau, original: &[Vec<f64>]) -> Option<Vec<f64>> {
    let m = tab.rows.len();
    if m == 0 || tab.basis.iter().any(|&b| b >= tab.n_real) {
        return None;
    }
    let n_real = tab.n_real;
    let bmat = DMatrix::from_fn(m, m, |r, c| original[tab.origin[r]][tab.basis[c]]);
    let rhs = DVector::from_fn(m, |r, _| original[tab.origin[r]][n_real]);
    let sol = bmat.lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite() || *v < -1e-9) {
        return None;
    }
    let mut xs = vec![0.0; n_real];
    for (c, &b) in tab.basis.iter().enumerate() {
        xs[b] = sol[c].max(0.0);
    }
    Some(xs)
}

/// Largest instance accepted by [`lp_oracle_enumerate`].
pub const ORACLE_MAX_VARS: usize = 12;
pub const ORACLE_MAX_CONSTRAINTS: usize = 24;
const ORACLE_MAX_SUBSETS: u64 = 5_000_000;

struct HalfSpace {
    normal: Vec<f64>,
    relation: Relation,
    rhs: f64,
}

/// Exact optimum by enumerating every basic point (all subsets of `d`
/// constraints or bounds taken as equalities, `d` = number of variables).
/// Unboundedness is decided on the recession cone, intersected with the
/// unit box.
pub fn lp_oracle_enumerate(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let d = lp.num_vars();
    if d > ORACLE_MAX_VARS || lp.constraints.len() > ORACLE_MAX_CONSTRAINTS {
        return Err(LpError::SizeCap(format!(
            "oracle handles at most {ORACLE_MAX_VARS} variables and {ORACLE_MAX_CONSTRAINTS} constraints"
        )));
    }
    if (0..d).any(|j| lp.lower[j] > lp.upper[j]) {
        return Ok(LpSolution::without_point(LpStatus::Infeasible, 0));
    }
    let spaces = half_spaces(lp, false);
    let Some(best) = best_vertex(&spaces, &lp.objective, d)? else {
        return Ok(LpSolution::without_point(LpStatus::Infeasible, 0));
    };
    let recession = half_spaces(lp, true);
    if let Some(dir) = best_vertex(&recession, &lp.objective, d)? {
        if lp.objective_at(&dir) < -1e-9 {
            return Ok(LpSolution::without_point(LpStatus::Unbounded, 0));
        }
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: lp.objective_at(&best),
        max_constraint_violation: lp.max_violation(&best),
        x: best,
        pivots: 0,
    })
}

fn half_spaces(lp: &LinearProgram, homogeneous: bool) -> Vec<HalfSpace> {
    let d = lp.num_vars();
    let unit = |j: usize| {
        let mut v = vec![0.0; d];
        v[j] = 1.0;
        v
    };
    let mut out: Vec<HalfSpace> = lp
        .constraints
        .iter()
        .map(|c| HalfSpace {
            normal: c.row.clone(),
            relation: c.relation,
            rhs: if homogeneous { 0.0 } else { c.rhs },
        })
        .collect();
    for j in 0..d {
        if lp.lower[j].is_finite() {
            out.push(HalfSpace {
                normal: unit(j),
                relation: Relation::Ge,
                rhs: if homogeneous { 0.0 } else { lp.lower[j] },
            });
        }
        if lp.upper[j].is_finite() {
            out.push(HalfSpace {
                normal: unit(j),
                relation: Relation::Le,
                rhs: if homogeneous { 0.0 } else { lp.upper[j] },
            });
        }
        if homogeneous {
            out.push(HalfSpace { normal: unit(j), relation: Relation::Le, rhs: 1.0 });
            out.push(HalfSpace { normal: unit(j), relation: Relation::Ge, rhs: -1.0 });
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul((n - i) as u64) / (i as u64 + 1))
}

fn best_vertex(spaces: &[HalfSpace], objective: &[f64], d: usize) -> Result<Option<Vec<f64>>, LpError> {
    let k = spaces.len();
    let a = DMatrix::from_fn(k, d, |r, c| spaces[r].normal[c]);
    if k < d || a.rank(1e-10) < d {
        return Err(LpError::SizeCap(
            "oracle needs a pointed feasible set (constraint rank below dimension)".into(),
        ));
    }
    if binomial(k, d) > ORACLE_MAX_SUBSETS {
        return Err(LpError::SizeCap("too many candidate vertices".into()));
    }
    let feasible = |x: &[f64]| {
        spaces.iter().all(|h| {
            let lhs: f64 = h.normal.iter().zip(x).map(|(a, v)| a * v).sum();
            let tol = 1e-9 * (1.0 + h.rhs.abs());
            match h.relation {
                Relation::Le => lhs <= h.rhs + tol,
                Relation::Ge => lhs >= h.rhs - tol,
                Relation::Eq => (lhs - h.rhs).abs() <= tol,
            }
        })
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        let sys = DMatrix::from_fn(d, d, |r, c| spaces[idx[r]].normal[c]);
        let rhs = DVector::from_fn(d, |r, _| spaces[idx[r]].rhs);
        let lu = sys.lu();
        if lu.determinant().abs() > 1e-12 {
            if let Some(x) = lu.solve(&rhs) {
                let x: Vec<f64> = x.iter().copied().collect();
                if feasible(&x) {
                    let val: f64 = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                    if best.as_ref().is_none_or(|(bv, _)| val < *bv) {
                        best = Some((val, x));
                    }
                }
            }
        }
        // advance to the next d-subset in lexicographic order
        let mut t = d;
        loop {
            if t == 0 {
                return Ok(best.map(|(_, x)| x));
            }
            t -= 1;
            if idx[t] < k - d + t {
                idx[t] += 1;
                for u in t + 1..d {
                    idx[u] = idx[u - 1] + 1;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_bounded_variable() {
        let mut lp = LinearProgram::new(vec![-1.0]);
        lp.set_bounds(0, 0.0, 1.0);
        let s = lp_solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.objective_value, -1.0, epsilon = 1e-12);
    }

    fn triangle() -> LinearProgram {
        let mut lp = LinearProgram::new(vec![-2.0, -1.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Le, 1.0);
        lp
    }

    #[test]
    fn triangle_vertex() {
        // vertices (0,0), (1,0), (0,1) give objectives 0, -2, -1
        let s = lp_solve(&triangle()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.objective_value, -2.0, epsilon = 1e-12);
        let o = lp_oracle_enumerate(&triangle()).unwrap();
        assert_eq!(o.status, LpStatus::Optimal);
        assert_abs_diff_eq!(o.x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(o.objective_value, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.set_free(0);
        lp.add_constraint(vec![1.0], Relation::Ge, 1.0);
        lp.add_constraint(vec![1.0], Relation::Le, 0.0);
        assert_eq!(lp_solve(&lp).unwrap().status, LpStatus::Infeasible);
        assert_eq!(lp_oracle_enumerate(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn tied_edge_gives_same_value() {
        // unit square, objective constant along the top edge
        let mut lp = LinearProgram::new(vec![0.0, -1.0]);
        lp.set_bounds(0, 0.0, 1.0).set_bounds(1, 0.0, 1.0);
        let s = lp_solve(&lp).unwrap();
        let o = lp_oracle_enumerate(&lp).unwrap();
        assert_abs_diff_eq!(s.objective_value, o.objective_value, epsilon = 1e-12);
        assert_abs_diff_eq!(s.objective_value, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn unbounded_detected_by_both() {
        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.add_constraint(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(lp_solve(&lp).unwrap().status, LpStatus::Unbounded);
        assert_eq!(lp_oracle_enumerate(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_reflected_variables() {
        // min x - y  s.t. x >= -3 (free x), y <= 2 (no lower bound), x + y >= 0
        let mut lp = LinearProgram::new(vec![1.0, -1.0]);
        lp.set_free(0).set_bounds(1, f64::NEG_INFINITY, 2.0);
        lp.add_constraint(vec![1.0, 0.0], Relation::Ge, -3.0);
        lp.add_constraint(vec![1.0, 1.0], Relation::Ge, 0.0);
        let s = lp_solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.x[0], -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.objective_value, -4.0, epsilon = 1e-12);
    }

    #[test]
    fn equality_rows_and_redundancy() {
        // duplicated equality must not break phase one
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 2.0);
        lp.add_constraint(vec![2.0, 2.0], Relation::Eq, 4.0);
        let s = lp_solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.objective_value, 2.0, epsilon = 1e-12);
        let o = lp_oracle_enumerate(&lp).unwrap();
        assert_abs_diff_eq!(o.objective_value, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn dimension_errors() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(lp_solve(&lp), Err(LpError::DimensionMismatch { .. })));
    }

    #[test]
    fn iteration_cap_is_an_error() {
        let opts = SimplexOptions { max_pivots: Some(0), ..Default::default() };
        assert!(matches!(
            lp_solve_with(&triangle(), &opts),
            Err(LpError::IterationLimit { .. })
        ));
    }

    #[test]
    fn oracle_size_cap() {
        let lp = LinearProgram::new(vec![1.0; 13]);
        assert!(matches!(lp_oracle_enumerate(&lp), Err(LpError::SizeCap(_))));
    }
}
