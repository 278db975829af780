//! Design diagnostics and theoretical calculators: Gram matrix and mutual
//! coherence, restricted-eigenvalue bounds, the tuning radius, the chain of
//! constants behind the sup-norm and sign-recovery guarantees, and the
//! oracle-inequality bounds. All logarithms are natural.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{invalid, DantzigError, Result};
use crate::types::{Dataset, LossSpec};

/// Empirical Gram matrix `X^T X / n`. Columns must have unit empirical norm.
pub fn gram(ds: &Dataset) -> Result<DMatrix<f64>> {
    let g = ds.x().tr_mul(ds.x()) / ds.n() as f64;
    if let Some(j) = (0..g.nrows()).find(|&j| (g[(j, j)] - 1.0).abs() > 1e-8) {
        return invalid(format!(
            "column {j} is not normalized (G_jj = {}); normalize the design first",
            g[(j, j)]
        ));
    }
    Ok(g)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Coherence {
    pub max_offdiag: f64,
    /// Pair attaining the maximum; `None` when `M = 1`.
    pub pair: Option<(usize, usize)>,
}

/// Largest absolute off-diagonal entry of `g`.
pub fn coherence(g: &DMatrix<f64>) -> Coherence {
    let mut out = Coherence { max_offdiag: 0.0, pair: None };
    for j in 0..g.nrows() {
        for k in j + 1..g.ncols() {
            let v = g[(j, k)].abs();
            if out.pair.is_none() || v > out.max_offdiag {
                out = Coherence { max_offdiag: v, pair: Some((j, k)) };
            }
        }
    }
    out
}

/// `1 / (3 beta s)`.
pub fn coherence_threshold(s: usize, beta: f64) -> f64 {
    1.0 / (3.0 * beta * s as f64)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CoherenceVerdict {
    pub max_offdiag: f64,
    pub threshold: f64,
    pub passes: bool,
}

/// Mutual coherence condition `max_{j != k} |G_jk| <= 1 / (3 beta s)`.
pub fn coherence_check(g: &DMatrix<f64>, s: usize, beta: f64) -> Result<CoherenceVerdict> {
    if s == 0 {
        return invalid("sparsity s must be at least 1");
    }
    if !(beta > 1.0) {
        return invalid(format!("beta must exceed 1, got {beta}"));
    }
    let max_offdiag = coherence(g).max_offdiag;
    let threshold = coherence_threshold(s, beta);
    Ok(CoherenceVerdict {
        max_offdiag,
        threshold,
        passes: max_offdiag <= threshold,
    })
}

/// Lower bound `sqrt(1 - 1/beta)` on the restricted eigenvalue under the
/// coherence condition.
pub fn re_lower_bound(beta: f64) -> Result<f64> {
    if !(beta > 1.0) {
        return invalid(format!("beta must exceed 1, got {beta}"));
    }
    Ok((1.0 - 1.0 / beta).sqrt())
}

pub const RE_ESTIMATE_MAX_M: usize = 12;

fn combinations(m: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k == 0 || k > m {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let mut t = k;
        loop {
            if t == 0 {
                return;
            }
            t -= 1;
            if idx[t] < m - k + t {
                idx[t] += 1;
                for u in t + 1..k {
                    idx[u] = idx[u - 1] + 1;
                }
                break;
            }
        }
    }
}

fn cone_ratio(g: &DMatrix<f64>, delta: &DVector<f64>, on: &[bool]) -> f64 {
    let quad = delta.dot(&(g * delta)).max(0.0);
    let on_norm: f64 = delta
        .iter()
        .zip(on)
        .filter(|(_, in_j)| **in_j)
        .map(|(v, _)| v * v)
        .sum::<f64>()
        .sqrt();
    quad.sqrt() / on_norm
}

/// Scales the off-support part so that `|delta_{J^c}|_1 <= |delta_J|_1`.
fn project_cone(delta: &mut DVector<f64>, on: &[bool]) {
    let (mut inside, mut outside) = (0.0, 0.0);
    for (v, in_j) in delta.iter().zip(on) {
        if *in_j {
            inside += v.abs();
        } else {
            outside += v.abs();
        }
    }
    if outside > inside && outside > 0.0 {
        let f = inside / outside;
        for (v, in_j) in delta.iter_mut().zip(on) {
            if !*in_j {
                *v *= f;
            }
        }
    }
}

/// Upper estimate of the restricted eigenvalue `zeta(s)`: minimum of
/// `sqrt(D^T G D) / |D_J|_2` over every support `|J| <= s`, evaluated at the
/// on-support minimum eigenvector and at `n_samples` random cone directions
/// per support, each refined by a short random local search.
///
/// The true `zeta(s)` can only be smaller.
pub fn re_estimate(g: &DMatrix<f64>, s: usize, n_samples: usize, seed: u64) -> Result<f64> {
    let m = g.nrows();
    if m > RE_ESTIMATE_MAX_M {
        return Err(DantzigError::SizeCap(format!(
            "restricted-eigenvalue estimate handles M <= {RE_ESTIMATE_MAX_M}, got {m}"
        )));
    }
    if s == 0 || s > m {
        return invalid(format!("sparsity must lie in 1..={m}, got {s}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for size in 1..=s {
        combinations(m, size, |support| {
            let mut on = vec![false; m];
            support.iter().for_each(|&j| on[j] = true);

            let sub = DMatrix::from_fn(size, size, |a, b| g[(support[a], support[b])]);
            let lam = SymmetricEigen::new(sub).eigenvalues.min().max(0.0);
            best = best.min(lam.sqrt());

            let mut local_best: Option<(f64, DVector<f64>)> = None;
            for _ in 0..n_samples {
                let mut d = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
                let budget: f64 = rng.random::<f64>();
                let (inside, outside) = support_split(&d, &on);
                if outside > 0.0 {
                    let f = budget * inside / outside;
                    for j in 0..m {
                        if !on[j] {
                            d[j] *= f;
                        }
                    }
                }
                let v = cone_ratio(g, &d, &on);
                if local_best.as_ref().is_none_or(|(b, _)| v < *b) {
                    local_best = Some((v, d));
                }
            }
            if let Some((mut val, mut d)) = local_best {
                let mut sigma = 0.5 * d.amax();
                for _ in 0..200 {
                    let mut cand = &d + DVector::from_fn(m, |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
                    project_cone(&mut cand, &on);
                    let v = cone_ratio(g, &cand, &on);
                    if v < val {
                        val = v;
                        d = cand;
                    } else {
                        sigma *= 0.9;
                    }
                }
                best = best.min(val);
            }
        });
    }
    Ok(best)
}

fn support_split(d: &DVector<f64>, on: &[bool]) -> (f64, f64) {
    d.iter().zip(on).fold((0.0, 0.0), |(a, b), (v, in_j)| {
        if *in_j {
            (a + v.abs(), b)
        } else {
            (a, b + v.abs())
        }
    })
}

/// `4 sqrt(2) L log(M) / n + 2 sqrt(6) sqrt(log(M) / n)`.
pub fn r_tilde(l_bound: f64, m: usize, n: usize) -> Result<f64> {
    if m < 2 {
        return invalid(format!("tuning needs M >= 2, got {m}"));
    }
    if n == 0 {
        return invalid("tuning needs n >= 1");
    }
    if !(l_bound > 0.0) {
        return invalid(format!("L must be positive, got {l_bound}"));
    }
    let lm = (m as f64).ln();
    let n = n as f64;
    Ok(4.0 * 2f64.sqrt() * l_bound * lm / n + 2.0 * 6f64.sqrt() * (lm / n).sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct Tuning {
    pub r_tilde: f64,
    pub r: f64,
    pub warnings: Vec<String>,
}

/// Theoretical radius `r = 6 ||d gamma||_inf r_tilde`. The quadratic loss has
/// no Lipschitz bound and is rejected.
pub fn tuning(loss: &LossSpec, l_bound: f64, m: usize, n: usize) -> Result<Tuning> {
    let lipschitz = loss.lipschitz()?;
    let rt = r_tilde(l_bound, m, n)?;
    let mut warnings = Vec::new();
    if rt > 1.0 {
        warnings.push(format!("r_tilde = {rt:.4} exceeds 1"));
    }
    let upper = (n as f64 / (m as f64).ln()).sqrt();
    let mut check = |name: &str, v: f64| {
        if !(1.0..=upper).contains(&v) {
            warnings.push(format!("{name} = {v} outside [1, sqrt(n / log M)] = [1, {upper:.4}]"));
        }
    };
    check("L", l_bound);
    if let Some(k) = loss.k_bound() {
        check("K", k);
    }
    for w in &warnings {
        warn!("{w}");
    }
    Ok(Tuning {
        r_tilde: rt,
        r: 6.0 * lipschitz * rt,
        warnings,
    })
}

/// Inputs of the Huber constants chain. Probabilities refer to the noise:
/// `p_alpha = P(|W| <= alpha)` and `p_clip = P(|W| <= 2K + alpha)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConstantsInputs {
    pub l_bound: f64,
    pub k_bound: f64,
    pub alpha: f64,
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub beta: f64,
    pub p_alpha: f64,
    pub p_clip: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SideConditions {
    /// `s <= 1 / sqrt(r)`
    pub sparsity: bool,
    /// `12 L^3 eta + L r_tilde + C2 / (sqrt(n) s^2) <= p_clip / 2`
    pub hessian_margin: bool,
    /// `1 <= K, L <= sqrt(n / log M)`
    pub kl_range: bool,
    /// `r_tilde <= 1`
    pub r_tilde_at_most_one: bool,
}

impl SideConditions {
    pub fn all(&self) -> bool {
        self.sparsity && self.hessian_margin && self.kl_range && self.r_tilde_at_most_one
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConstantsReport {
    pub r_tilde: f64,
    pub r: f64,
    pub zeta_lower: f64,
    pub kappa: f64,
    pub c_margin: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub eta: f64,
    pub rho_threshold: f64,
    pub side_conditions: SideConditions,
    pub inputs: ConstantsInputs,
}

/// `8 (1 + 2K) beta / (p_alpha (beta - 1)) + 1/6`.
pub fn constant_c1(k_bound: f64, p_alpha: f64, beta: f64) -> f64 {
    8.0 * (1.0 + 2.0 * k_bound) * beta / (p_alpha * (beta - 1.0)) + 1.0 / 6.0
}

/// `2 sqrt(1 + (1 + L^2)(8 C1 L^3 + 4 L / s)) + (1 + L^2) / 3`.
pub fn constant_c2(c1: f64, l_bound: f64, s: usize) -> f64 {
    let l2 = 1.0 + l_bound * l_bound;
    2.0 * (1.0 + l2 * (8.0 * c1 * l_bound.powi(3) + 4.0 * l_bound / s as f64)).sqrt() + l2 / 3.0
}

/// `1 / (3 beta) + 12 L^3 C1 + C2 / (sqrt(n) s)`.
pub fn constant_c3(c1: f64, c2: f64, l_bound: f64, beta: f64, n: usize, s: usize) -> f64 {
    1.0 / (3.0 * beta) + 12.0 * l_bound.powi(3) * c1 + c2 / ((n as f64).sqrt() * s as f64)
}

/// `(4 + 2 C1 C3) / p_clip`.
pub fn constant_c4(c1: f64, c3: f64, p_clip: f64) -> f64 {
    (4.0 + 2.0 * c1 * c3) / p_clip
}

/// Evaluates the whole chain for the Huber loss. Assumes the noise c.d.f.
/// is 1-Lipschitz, the normalization under which these constants hold.
pub fn constants_chain(inp: &ConstantsInputs) -> Result<ConstantsReport> {
    if !(inp.beta > 1.0) {
        return invalid(format!("beta must exceed 1, got {}", inp.beta));
    }
    for (name, p) in [("p_alpha", inp.p_alpha), ("p_clip", inp.p_clip)] {
        if !(p > 0.0 && p <= 1.0) {
            return invalid(format!("{name} must lie in (0, 1], got {p}"));
        }
    }
    if inp.s == 0 {
        return invalid("sparsity s must be at least 1");
    }
    let loss = LossSpec::huber(inp.k_bound, inp.alpha)?;
    let tune = tuning(&loss, inp.l_bound, inp.m, inp.n)?;
    let (rt, r) = (tune.r_tilde, tune.r);
    let l = inp.l_bound;
    let s = inp.s as f64;
    let n = inp.n as f64;

    let c1 = constant_c1(inp.k_bound, inp.p_alpha, inp.beta);
    let c2 = constant_c2(c1, l, inp.s);
    let c3 = constant_c3(c1, c2, l, inp.beta, inp.n, inp.s);
    let c4 = constant_c4(c1, c3, inp.p_clip);
    let eta = c1 * r * s;

    let upper = (n / (inp.m as f64).ln()).sqrt();
    let side_conditions = SideConditions {
        sparsity: s <= 1.0 / r.sqrt(),
        hessian_margin: 12.0 * l.powi(3) * eta + l * rt + c2 / (n.sqrt() * s * s) <= inp.p_clip / 2.0,
        kl_range: (1.0..=upper).contains(&inp.k_bound) && (1.0..=upper).contains(&l),
        r_tilde_at_most_one: rt <= 1.0,
    };
    Ok(ConstantsReport {
        r_tilde: rt,
        r,
        zeta_lower: re_lower_bound(inp.beta)?,
        kappa: 2.0,
        c_margin: margin_constant_huber(inp.p_alpha)?.c,
        c1,
        c2,
        c3,
        c4,
        eta,
        rho_threshold: 2.0 * c4 * r,
        side_conditions,
        inputs: *inp,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MarginConstant {
    pub kappa: f64,
    pub c: f64,
}

/// Huber margin: `kappa = 2`, `c = sqrt(2 / p_alpha)`.
pub fn margin_constant_huber(p_alpha: f64) -> Result<MarginConstant> {
    if !(p_alpha > 0.0 && p_alpha <= 1.0) {
        return invalid(format!("p_alpha must lie in (0, 1], got {p_alpha}"));
    }
    if p_alpha < 1e-6 {
        warn!("p_alpha = {p_alpha:e} makes the margin constant very large");
    }
    Ok(MarginConstant {
        kappa: 2.0,
        c: (2.0 / p_alpha).sqrt(),
    })
}

/// Logistic margin: `kappa = 2`, `c = 1 / sqrt(tau(K))`.
pub fn margin_constant_logistic(tau: f64) -> Result<MarginConstant> {
    if !(tau > 0.0) {
        return invalid(format!("tau must be positive, got {tau}"));
    }
    Ok(MarginConstant { kappa: 2.0, c: 1.0 / tau.sqrt() })
}

/// Right-hand sides of the excess-risk and l1 oracle inequalities, split
/// into the leading (margin) term and the remainder.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OracleBounds {
    pub excess_leading: f64,
    pub excess_remainder: f64,
    pub excess_bound: f64,
    pub l1_leading: f64,
    pub l1_remainder: f64,
    pub l1_bound: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct BoundInputs {
    pub k_bound: f64,
    pub r: f64,
    pub r_tilde: f64,
    /// `||d gamma / du||_inf`
    pub lipschitz: f64,
    pub s: usize,
    pub kappa: f64,
    pub c_margin: f64,
    pub zeta: f64,
}

/// Generic margin-exponent form, valid for `kappa` in `(1, 2]`.
pub fn theorem1_bounds(b: &BoundInputs) -> Result<OracleBounds> {
    if !(b.kappa > 1.0 && b.kappa <= 2.0) {
        return invalid(format!("kappa must lie in (1, 2], got {}", b.kappa));
    }
    if !(b.zeta > 0.0) {
        return invalid(format!("zeta must be positive, got {}", b.zeta));
    }
    let k = b.k_bound;
    let s = (b.s as f64).sqrt();
    let e = b.kappa / (b.kappa - 1.0);
    let excess_leading = (2.0 * (1.0 + 2.0 * k) * b.c_margin * b.r * s / b.zeta).powf(e);
    let excess_remainder = 12.0 * b.lipschitz * e * b.r_tilde * b.r_tilde;
    let l1_leading =
        (2.0 * b.c_margin * s / b.zeta).powf(e) * ((1.0 + 2.0 * k) * b.r).powf(1.0 / (b.kappa - 1.0));
    let l1_remainder = 2.0 * k / ((b.kappa - 1.0) * (1.0 + 2.0 * k)) * b.r_tilde;
    Ok(OracleBounds {
        excess_leading,
        excess_remainder,
        excess_bound: excess_leading + excess_remainder,
        l1_leading,
        l1_remainder,
        l1_bound: l1_leading + l1_remainder,
    })
}

fn corollary(scale: f64, k: f64, zeta: f64, s: usize, r: f64) -> Result<OracleBounds> {
    if !(zeta > 0.0) {
        return invalid(format!("zeta must be positive, got {zeta}"));
    }
    let s = s as f64;
    let z2 = zeta * zeta;
    let excess_leading = scale * (1.0 + 2.0 * k).powi(2) / z2 * s * r * r;
    let excess_remainder = 2.0 / 3.0 * r * r;
    let l1_leading = scale * (1.0 + 2.0 * k) / z2 * s * r;
    let l1_remainder = k / (3.0 * (1.0 + 2.0 * k)) * r;
    Ok(OracleBounds {
        excess_leading,
        excess_remainder,
        excess_bound: excess_leading + excess_remainder,
        l1_leading,
        l1_remainder,
        l1_bound: l1_leading + l1_remainder,
    })
}

/// Huber specialization: leading constants `8 (1+2K)^2 / (p_alpha zeta^2)`.
pub fn corollary_huber(k_bound: f64, p_alpha: f64, zeta: f64, s: usize, r: f64) -> Result<OracleBounds> {
    if !(p_alpha > 0.0 && p_alpha <= 1.0) {
        return invalid(format!("p_alpha must lie in (0, 1], got {p_alpha}"));
    }
    corollary(8.0 / p_alpha, k_bound, zeta, s, r)
}

/// Logistic specialization: leading constants `4 (1+2K)^2 / (tau zeta^2)`.
pub fn corollary_logistic(k_bound: f64, tau: f64, zeta: f64, s: usize, r: f64) -> Result<OracleBounds> {
    if !(tau > 0.0) {
        return invalid(format!("tau must be positive, got {tau}"));
    }
    corollary(4.0 / tau, k_bound, zeta, s, r)
}

/// `Phi''` for the logit link `Phi(u) = log(1 + e^u)`.
pub fn logit_phi_second(u: f64) -> f64 {
    let s = crate::losses::sigmoid(u);
    s * (1.0 - s)
}

/// `tau(K) = 0.5 * inf_{|u| <= K} Phi''(u)`: a uniform grid of 100001 points
/// refined by golden-section search around the grid minimizer.
pub fn tau_logistic(k_bound: f64, phi_second: impl Fn(f64) -> f64) -> Result<f64> {
    if !(k_bound >= 0.0 && k_bound.is_finite()) {
        return invalid(format!("K must be a finite nonnegative number, got {k_bound}"));
    }
    let eval = |u: f64| -> Result<f64> {
        let v = phi_second(u);
        if v.is_nan() || v < 0.0 {
            return invalid(format!("Phi''({u}) = {v}: Phi must be convex"));
        }
        Ok(v)
    };
    if k_bound == 0.0 {
        return Ok(0.5 * eval(0.0)?);
    }
    const POINTS: usize = 100_001;
    let h = 2.0 * k_bound / (POINTS - 1) as f64;
    let mut best = (f64::INFINITY, 0usize);
    for i in 0..POINTS {
        let v = eval(-k_bound + i as f64 * h)?;
        if v < best.0 {
            best = (v, i);
        }
    }
    let (mut lo, mut hi) = (
        -k_bound + best.1.saturating_sub(1) as f64 * h,
        (-k_bound + (best.1 + 1) as f64 * h).min(k_bound),
    );
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut min = best.0;
    for _ in 0..100 {
        let a = hi - ratio * (hi - lo);
        let b = lo + ratio * (hi - lo);
        let (fa, fb) = (eval(a)?, eval(b)?);
        min = min.min(fa).min(fb);
        if fa < fb {
            hi = b;
        } else {
            lo = a;
        }
    }
    Ok(0.5 * min)
}
