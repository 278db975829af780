//! Dantzig-type estimators: `min |theta|_1` subject to `|grad R_n(theta)|_inf <= r`.
//!
//! For the quadratic loss the constraint is linear and one LP suffices. The
//! Huber gradient is piecewise linear: each observation is either inside the
//! clip band or clipped high/low, and every such assignment ([`ClipPattern`])
//! gives one polyhedral piece of the feasible set. [`fit_dantzig_huber`]
//! solves an exact LP per piece, starting from the piece that contains the
//! Huber Lasso solution, and walks to neighbouring pieces while that lowers
//! the l1 norm.

use std::collections::{HashMap, HashSet};

use log::debug;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{invalid, DantzigError, Result};
use crate::losses::{gradient_sup_norm, huber_psi, masked_gram, risk_gradient};
use crate::lp::{lp_solve_with, LinearProgram, LpSolution, LpStatus, Relation, SimplexOptions};
use crate::types::{BoxPolicy, CoefVector, Dataset, LossSpec};

/// Slack allowed when certifying `|grad|_inf <= r` on a returned fit.
pub const REPORT_FEAS_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ClipState {
    Interior,
    ClipHigh,
    ClipLow,
}

/// Position of every residual relative to the band `[-clip, clip]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ClipPattern(pub Vec<ClipState>);

impl ClipPattern {
    /// Residuals exactly at `+-clip` are `Interior`.
    pub fn of(ds: &Dataset, theta: &CoefVector, clip: f64) -> Self {
        Self(
            ds.residuals(theta)
                .iter()
                .map(|&res| {
                    if res > clip {
                        ClipState::ClipHigh
                    } else if res < -clip {
                        ClipState::ClipLow
                    } else {
                        ClipState::Interior
                    }
                })
                .collect(),
        )
    }

    pub fn count(&self, state: ClipState) -> usize {
        self.0.iter().filter(|s| **s == state).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FitStatus {
    /// Optimal for its linear piece with no piece boundary active.
    Exact,
    /// Optimal for its piece, and no neighbouring piece does better.
    PatternConverged,
    /// Pattern iteration cycled or hit its cap; best feasible iterate.
    BestEffort,
}

#[derive(Clone, Debug)]
pub struct DantzigFit {
    pub theta: CoefVector,
    pub r_used: f64,
    /// `|grad R_n(theta)|_inf` for the true (nonlinear) loss.
    pub grad_inf_norm: f64,
    pub l1_norm: f64,
    pub pattern_iters: usize,
    pub status: FitStatus,
    pub box_policy: BoxPolicy,
}

#[derive(Clone, Copy, Debug)]
pub struct LassoOptions {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LassoFit {
    pub theta: CoefVector,
    pub iters: usize,
    /// Largest violation of the first-order optimality conditions.
    pub stationarity: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct HuberFitOptions {
    pub max_pattern_iters: usize,
    pub lasso: LassoOptions,
    pub lp: SimplexOptions,
}

impl Default for HuberFitOptions {
    fn default() -> Self {
        Self {
            max_pattern_iters: 200,
            lasso: LassoOptions::default(),
            lp: SimplexOptions::default(),
        }
    }
}

fn check_r(r: f64) -> Result<()> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        invalid(format!("r must be positive, got {r}"))
    }
}

/// A row `coeffs . theta (rel) rhs` on the coefficient vector.
#[derive(Clone, Debug)]
struct ThetaRow {
    coeffs: Vec<f64>,
    relation: Relation,
    rhs: f64,
}

impl ThetaRow {
    fn violation(&self, theta: &[f64]) -> f64 {
        let lhs: f64 = self.coeffs.iter().zip(theta).map(|(a, t)| a * t).sum();
        match self.relation {
            Relation::Le => lhs - self.rhs,
            Relation::Ge => self.rhs - lhs,
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }

    /// Same row on the split variables `theta = p - q`.
    fn split(&self) -> Vec<f64> {
        let mut row = self.coeffs.clone();
        row.extend(self.coeffs.iter().map(|v| -v));
        row
    }
}

/// Builds `min sum(p + q)` with `-r <= b - H (p - q) <= r`.
fn gradient_box_lp(h: &DMatrix<f64>, b: &DVector<f64>, r: f64) -> LinearProgram {
    let m = b.len();
    let mut lp = LinearProgram::new(vec![1.0; 2 * m]);
    for j in 0..m {
        let coeffs: Vec<f64> = (0..m).map(|k| h[(j, k)]).collect();
        let row = ThetaRow { coeffs, relation: Relation::Le, rhs: 0.0 }.split();
        lp.add_constraint(row.clone(), Relation::Le, b[j] + r);
        lp.add_constraint(row, Relation::Ge, b[j] - r);
    }
    lp
}

fn box_rows(ds: &Dataset, policy: &BoxPolicy, lp: &mut LinearProgram, lazy: &mut Vec<ThetaRow>) {
    let m = ds.m();
    match *policy {
        BoxPolicy::None => {}
        BoxPolicy::L1Surrogate { k_bound } => {
            lp.add_constraint(vec![ds.l_bound(); 2 * m], Relation::Le, k_bound);
        }
        BoxPolicy::SampleSup { k_bound } => {
            for i in 0..ds.n() {
                let coeffs: Vec<f64> = ds.x().row(i).iter().copied().collect();
                lazy.push(ThetaRow { coeffs: coeffs.clone(), relation: Relation::Le, rhs: k_bound });
                lazy.push(ThetaRow { coeffs, relation: Relation::Ge, rhs: -k_bound });
            }
        }
    }
}

fn theta_of(sol: &LpSolution, m: usize) -> Vec<f64> {
    (0..m).map(|j| sol.x[j] - sol.x[m + j]).collect()
}

/// Solves `base` plus whichever `lazy` rows turn out to be violated, adding
/// them in rounds until the solution satisfies all of them. The optimum is
/// the optimum of `base` with every lazy row present.
fn solve_with_lazy_rows(
    mut lp: LinearProgram,
    lazy: &[ThetaRow],
    m: usize,
    opts: &SimplexOptions,
) -> Result<LpSolution> {
    let mut added = vec![false; lazy.len()];
    loop {
        let sol = lp_solve_with(&lp, opts)?;
        if sol.status != LpStatus::Optimal {
            return Ok(sol);
        }
        let theta = theta_of(&sol, m);
        let scale = 1.0 + theta.iter().fold(0.0f64, |a, t| a.max(t.abs()));
        let mut violated: Vec<(usize, f64)> = lazy
            .iter()
            .enumerate()
            .filter(|(k, _)| !added[*k])
            .map(|(k, row)| (k, row.violation(&theta)))
            .filter(|(_, v)| *v > opts.feas_tol * scale)
            .collect();
        if violated.is_empty() {
            return Ok(sol);
        }
        violated.sort_by(|a, b| b.1.total_cmp(&a.1));
        // a bounded batch per round keeps the tableau small
        for &(k, _) in violated.iter().take(4 * m.max(8)) {
            added[k] = true;
            lp.add_constraint(lazy[k].split(), lazy[k].relation, lazy[k].rhs);
        }
    }
}

fn finish_fit(
    ds: &Dataset,
    theta: CoefVector,
    r: f64,
    loss: &LossSpec,
    status: FitStatus,
    pattern_iters: usize,
    policy: BoxPolicy,
) -> Result<DantzigFit> {
    let grad_inf_norm = gradient_sup_norm(ds, &theta, loss)?;
    Ok(DantzigFit {
        l1_norm: theta.l1_norm(),
        theta,
        r_used: r,
        grad_inf_norm,
        pattern_iters,
        status,
        box_policy: policy,
    })
}

/// Quadratic-loss Dantzig selector:
/// `min |theta|_1` s.t. `|X^T (y - X theta) / n|_inf <= r` and the box policy.
pub fn fit_dantzig_quadratic(ds: &Dataset, r: f64, policy: BoxPolicy) -> Result<DantzigFit> {
    fit_dantzig_quadratic_with(ds, r, policy, &SimplexOptions::default())
}

pub fn fit_dantzig_quadratic_with(
    ds: &Dataset,
    r: f64,
    policy: BoxPolicy,
    opts: &SimplexOptions,
) -> Result<DantzigFit> {
    ds.require_normalized()?;
    check_r(r)?;
    policy.validate()?;
    let n = ds.n() as f64;
    let gram = ds.x().tr_mul(ds.x()) / n;
    let z = ds.x().tr_mul(ds.y()) / n;
    let mut lp = gradient_box_lp(&gram, &z, r);
    let mut lazy = Vec::new();
    box_rows(ds, &policy, &mut lp, &mut lazy);
    let sol = solve_with_lazy_rows(lp, &lazy, ds.m(), opts)?;
    match sol.status {
        LpStatus::Optimal => {
            let theta = CoefVector::from_vec(theta_of(&sol, ds.m()));
            finish_fit(ds, theta, r, &LossSpec::Quadratic, FitStatus::Exact, 1, policy)
        }
        LpStatus::Infeasible => Err(DantzigError::Infeasible {
            binding: if policy == BoxPolicy::None {
                "the gradient box itself".to_string()
            } else {
                policy.describe()
            },
        }),
        LpStatus::Unbounded => Err(DantzigError::Lp(crate::lp::LpError::Numerical(
            "l1 objective reported unbounded".into(),
        ))),
    }
}

/// Linearization of the Huber gradient on one clip pattern:
/// `-grad = b - H theta` with `H` the Gram of interior rows.
fn pattern_system(ds: &Dataset, pattern: &ClipPattern, clip: f64) -> (DMatrix<f64>, DVector<f64>) {
    let n = ds.n() as f64;
    let interior: Vec<usize> = (0..ds.n())
        .filter(|&i| pattern.0[i] == ClipState::Interior)
        .collect();
    let h = masked_gram(ds.x(), &interior);
    let weights = DVector::from_fn(ds.n(), |i, _| match pattern.0[i] {
        ClipState::Interior => ds.y()[i],
        ClipState::ClipHigh => clip,
        ClipState::ClipLow => -clip,
    });
    let b = ds.x().tr_mul(&weights) / n;
    (h, b)
}

fn region_rows(ds: &Dataset, pattern: &ClipPattern, clip: f64) -> Vec<ThetaRow> {
    let mut rows = Vec::new();
    for i in 0..ds.n() {
        let coeffs: Vec<f64> = ds.x().row(i).iter().copied().collect();
        let y = ds.y()[i];
        // residual y - x.theta relative to the band
        match pattern.0[i] {
            ClipState::Interior => {
                rows.push(ThetaRow { coeffs: coeffs.clone(), relation: Relation::Ge, rhs: y - clip });
                rows.push(ThetaRow { coeffs, relation: Relation::Le, rhs: y + clip });
            }
            ClipState::ClipHigh => rows.push(ThetaRow { coeffs, relation: Relation::Le, rhs: y - clip }),
            ClipState::ClipLow => rows.push(ThetaRow { coeffs, relation: Relation::Ge, rhs: y + clip }),
        }
    }
    rows
}

#[derive(Clone, Debug)]
enum RegionOutcome {
    Optimal(CoefVector),
    Infeasible,
}

struct HuberSearch<'a> {
    ds: &'a Dataset,
    r: f64,
    clip: f64,
    loss: LossSpec,
    policy: BoxPolicy,
    opts: HuberFitOptions,
    cache: HashMap<ClipPattern, RegionOutcome>,
    solves: usize,
    best: Option<(f64, CoefVector)>,
    best_grad_seen: f64,
}

impl HuberSearch<'_> {
    fn consider(&mut self, theta: &CoefVector) -> Result<()> {
        let g = gradient_sup_norm(self.ds, theta, &self.loss)?;
        self.best_grad_seen = self.best_grad_seen.min(g);
        if g <= self.r + REPORT_FEAS_TOL && self.policy.contains(self.ds, theta, 1e-9) {
            let l1 = theta.l1_norm();
            if self.best.as_ref().is_none_or(|(b, _)| l1 < *b) {
                self.best = Some((l1, theta.clone()));
            }
        }
        Ok(())
    }

    fn lp_for(&self, pattern: &ClipPattern, with_region: bool) -> (LinearProgram, Vec<ThetaRow>) {
        let (h, b) = pattern_system(self.ds, pattern, self.clip);
        let mut lp = gradient_box_lp(&h, &b, self.r);
        let mut lazy = Vec::new();
        box_rows(self.ds, &self.policy, &mut lp, &mut lazy);
        if with_region {
            lazy.extend(region_rows(self.ds, pattern, self.clip));
        }
        (lp, lazy)
    }

    fn solve_region(&mut self, pattern: &ClipPattern) -> Result<RegionOutcome> {
        if let Some(hit) = self.cache.get(pattern) {
            return Ok(hit.clone());
        }
        self.solves += 1;
        let (lp, lazy) = self.lp_for(pattern, true);
        let sol = solve_with_lazy_rows(lp, &lazy, self.ds.m(), &self.opts.lp)?;
        let outcome = match sol.status {
            LpStatus::Optimal => {
                let theta = CoefVector::from_vec(theta_of(&sol, self.ds.m()));
                self.consider(&theta)?;
                RegionOutcome::Optimal(theta)
            }
            _ => RegionOutcome::Infeasible,
        };
        self.cache.insert(pattern.clone(), outcome.clone());
        Ok(outcome)
    }

    fn solve_relaxed(&mut self, pattern: &ClipPattern) -> Result<Option<CoefVector>> {
        self.solves += 1;
        let (lp, lazy) = self.lp_for(pattern, false);
        let sol = solve_with_lazy_rows(lp, &lazy, self.ds.m(), &self.opts.lp)?;
        if sol.status != LpStatus::Optimal {
            return Ok(None);
        }
        let theta = CoefVector::from_vec(theta_of(&sol, self.ds.m()));
        self.consider(&theta)?;
        Ok(Some(theta))
    }

    /// Observations whose residual sits on `+-clip`.
    fn boundary(&self, theta: &CoefVector) -> Vec<usize> {
        let tol = 1e-9 * (1.0 + self.clip);
        self.ds
            .residuals(theta)
            .iter()
            .enumerate()
            .filter(|(_, r)| (r.abs() - self.clip).abs() <= tol)
            .map(|(i, _)| i)
            .collect()
    }

    fn neighbours(&self, pattern: &ClipPattern, theta: &CoefVector, boundary: &[usize]) -> Vec<ClipPattern> {
        let res = self.ds.residuals(theta);
        let flip = |p: &mut ClipPattern, i: usize| {
            p.0[i] = match p.0[i] {
                ClipState::Interior if res[i] > 0.0 => ClipState::ClipHigh,
                ClipState::Interior => ClipState::ClipLow,
                _ => ClipState::Interior,
            };
        };
        let mut out = Vec::new();
        for &i in boundary {
            let mut p = pattern.clone();
            flip(&mut p, i);
            out.push(p);
        }
        if boundary.len() > 1 {
            let mut p = pattern.clone();
            boundary.iter().for_each(|&i| flip(&mut p, i));
            out.push(p);
        }
        out
    }
}

/// Huber-loss Dantzig selector by clip-pattern sequential LP.
pub fn fit_dantzig_huber(ds: &Dataset, r: f64, loss: &LossSpec, policy: BoxPolicy) -> Result<DantzigFit> {
    fit_dantzig_huber_with(ds, r, loss, policy, &HuberFitOptions::default())
}

pub fn fit_dantzig_huber_with(
    ds: &Dataset,
    r: f64,
    loss: &LossSpec,
    policy: BoxPolicy,
    opts: &HuberFitOptions,
) -> Result<DantzigFit> {
    ds.require_normalized()?;
    check_r(r)?;
    policy.validate()?;
    let Some(clip) = loss.clip() else {
        return Err(DantzigError::UnsupportedLoss("the clip-pattern Dantzig solver"));
    };
    loss.validate()?;

    let init = fit_lasso(ds, r, loss, &opts.lasso)?;
    let mut search = HuberSearch {
        ds,
        r,
        clip,
        loss: *loss,
        policy,
        opts: *opts,
        cache: HashMap::new(),
        solves: 0,
        best: None,
        best_grad_seen: f64::INFINITY,
    };
    search.consider(&init.theta)?;

    let mut pattern = ClipPattern::of(ds, &init.theta, clip);
    let mut expanded: HashSet<ClipPattern> = HashSet::new();
    let mut converged: Option<(CoefVector, bool)> = None;
    'outer: while search.solves < opts.max_pattern_iters {
        if !expanded.insert(pattern.clone()) {
            debug!("clip pattern revisited after {} solves", search.solves);
            break;
        }
        match search.solve_region(&pattern)? {
            RegionOutcome::Optimal(theta) => {
                let l1 = theta.l1_norm();
                let boundary = search.boundary(&theta);
                if boundary.is_empty() {
                    converged = Some((theta, true));
                    break;
                }
                for nb in search.neighbours(&pattern, &theta, &boundary) {
                    if search.solves >= opts.max_pattern_iters {
                        break 'outer;
                    }
                    if expanded.contains(&nb) {
                        continue;
                    }
                    if let RegionOutcome::Optimal(t) = search.solve_region(&nb)? {
                        if t.l1_norm() < l1 - 1e-9 * (1.0 + l1) {
                            pattern = nb;
                            continue 'outer;
                        }
                    }
                }
                converged = Some((theta, false));
                break;
            }
            RegionOutcome::Infeasible => match search.solve_relaxed(&pattern)? {
                Some(theta) => pattern = ClipPattern::of(ds, &theta, clip),
                None => break,
            },
        }
    }

    let Some((best_l1, best)) = search.best.clone() else {
        return Err(DantzigError::NoFeasibleIterate {
            r,
            best_grad_inf: search.best_grad_seen,
        });
    };
    let status = match converged {
        Some((theta, interior)) => {
            if theta.l1_norm() <= best_l1 + 1e-12 * (1.0 + best_l1) {
                if interior {
                    FitStatus::Exact
                } else {
                    FitStatus::PatternConverged
                }
            } else {
                FitStatus::PatternConverged
            }
        }
        None => FitStatus::BestEffort,
    };
    finish_fit(ds, best, r, loss, status, search.solves, policy)
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// First-order optimality violation of `R_n + r |.|_1` at `theta`.
fn lasso_stationarity(theta: &DVector<f64>, grad: &DVector<f64>, r: f64) -> f64 {
    theta
        .iter()
        .zip(grad.iter())
        .map(|(&t, &g)| {
            if t == 0.0 {
                (g.abs() - r).max(0.0)
            } else {
                (g + r * t.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// `min R_n(theta) + r |theta|_1` by accelerated proximal gradient with
/// adaptive restart. Used to initialize the Huber solver; a run that hits
/// the iteration cap still returns its last iterate with `converged = false`.
pub fn fit_lasso(ds: &Dataset, r: f64, loss: &LossSpec, opts: &LassoOptions) -> Result<LassoFit> {
    check_r(r)?;
    if matches!(loss, LossSpec::Logistic { .. }) {
        return Err(DantzigError::UnsupportedLoss("the Lasso initializer"));
    }
    loss.validate()?;
    let n = ds.n() as f64;
    let m = ds.m();
    let gram = ds.x().tr_mul(ds.x()) / n;
    let z = ds.x().tr_mul(ds.y()) / n;
    let lipschitz = SymmetricEigen::new(gram.clone())
        .eigenvalues
        .max()
        .max(f64::MIN_POSITIVE);
    let step = 1.0 / lipschitz;

    let clip = loss.clip();
    let grad = |theta: &DVector<f64>| -> DVector<f64> {
        match clip {
            None => &gram * theta - &z,
            Some(c) => {
                let res = ds.y() - ds.x() * theta;
                let psi = res.map(|v| huber_psi(v, c));
                -(ds.x().tr_mul(&psi) / n)
            }
        }
    };

    let mut theta = DVector::zeros(m);
    let mut extrap = theta.clone();
    let mut t = 1.0f64;
    let mut stationarity = lasso_stationarity(&theta, &grad(&theta), r);
    let mut iters = 0;
    while stationarity > opts.tol && iters < opts.max_iters {
        iters += 1;
        let g = grad(&extrap);
        let next = (&extrap - &g * step).map(|v| soft(v, step * r));
        // restart momentum when it points uphill
        if (&extrap - &next).dot(&(&next - &theta)) > 0.0 {
            t = 1.0;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        extrap = &next + (&next - &theta) * ((t - 1.0) / t_next);
        theta = next;
        t = t_next;
        if iters % 5 == 0 || iters == 1 {
            stationarity = lasso_stationarity(&theta, &grad(&theta), r);
        }
    }
    let converged = stationarity <= opts.tol;
    if !converged {
        log::warn!("Lasso initializer stopped after {iters} iterations (stationarity {stationarity:.2e})");
    }
    Ok(LassoFit {
        theta: CoefVector::from(theta),
        iters,
        stationarity,
        converged,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Grid {
    fn points(&self) -> usize {
        ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1
    }
}

/// Exhaustive scan of a grid for `M <= 3`: the feasible point of least l1
/// norm, where feasibility is `|grad R_n|_inf <= r + step * L`.
pub fn brute_force_dantzig(ds: &Dataset, r: f64, loss: &LossSpec, grid: Grid) -> Result<CoefVector> {
    let m = ds.m();
    if m > 3 {
        return Err(DantzigError::SizeCap(format!("grid oracle handles M <= 3, got {m}")));
    }
    if !(grid.step > 0.0 && grid.hi >= grid.lo) {
        return invalid("grid needs step > 0 and hi >= lo");
    }
    let k = grid.points();
    let total = (k as f64).powi(m as i32);
    if total > 1e7 {
        return Err(DantzigError::SizeCap(format!("{total:.0} grid points exceed 1e7")));
    }
    let tol = r + grid.step * ds.l_bound();
    let n = ds.n() as f64;
    let gram = ds.x().tr_mul(ds.x()) / n;
    let z = ds.x().tr_mul(ds.y()) / n;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx = vec![0usize; m];
    let mut theta = vec![0.0; m];
    for _ in 0..total as usize {
        for j in 0..m {
            theta[j] = grid.lo + idx[j] as f64 * grid.step;
        }
        let l1: f64 = theta.iter().map(|v| v.abs()).sum();
        if best.as_ref().is_none_or(|(b, _)| l1 < *b) {
            let g = match loss {
                LossSpec::Quadratic => {
                    let tv = DVector::from_column_slice(&theta);
                    (&gram * tv - &z).amax()
                }
                _ => risk_gradient(ds, &CoefVector::from_vec(theta.clone()), loss)?.grad_inf_norm,
            };
            if g <= tol {
                best = Some((l1, theta.clone()));
            }
        }
        for j in 0..m {
            idx[j] += 1;
            if idx[j] < k {
                break;
            }
            idx[j] = 0;
        }
    }
    best.map(|(_, t)| CoefVector::from_vec(t))
        .ok_or_else(|| DantzigError::InvalidInput("no feasible grid point".into()))
}

/// Zeroes every entry with `|theta_j| <= tau`.
pub fn threshold_estimator(theta: &CoefVector, tau: f64) -> CoefVector {
    CoefVector::from_fn(theta.len(), |j| if theta[j].abs() > tau { theta[j] } else { 0.0 })
}
