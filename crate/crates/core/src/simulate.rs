//! Monte Carlo harness for the linear model `y = X theta* + W`: design and
//! noise generators, replicated fits, excess-risk estimates and sweeps.
//!
//! Replication `rep` draws its data from the ChaCha stream `2 rep` of the
//! configured seed and its evaluation sample from stream `2 rep + 1`, so
//! results do not depend on scheduling or on which reps are run.

use nalgebra::{DMatrix, DVector};
use rand::distr::Open01;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erf;
use statrs::statistics::{Data, OrderStatistics};

use crate::dantzig::{fit_dantzig_huber, fit_dantzig_quadratic, threshold_estimator, DantzigFit};
use crate::diagnostics::{constants_chain, tuning, ConstantsInputs};
use crate::error::{invalid, DantzigError, Result};
use crate::losses::{gradient_sup_norm, loss_value};
use crate::types::{BoxPolicy, CoefVector, Dataset, LossSpec};

/// Design family. Every family is rescaled to unit empirical column norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Design {
    /// `sqrt(n) Q` for the thin QR factor of a Gaussian matrix; needs `n >= M`.
    Orthonormal,
    /// I.i.d. standard normal entries.
    GaussianNormalized,
    /// Gaussian rows with unit variances and common correlation `rho0`.
    Equicorrelated { rho0: f64 },
    /// I.i.d. signs.
    Rademacher,
}

impl Design {
    fn validate(&self, m: usize) -> Result<()> {
        if let Design::Equicorrelated { rho0 } = *self {
            let lo = if m > 1 { -1.0 / (m as f64 - 1.0) } else { f64::NEG_INFINITY };
            if !(rho0 > lo && rho0 < 1.0) {
                return invalid(format!(
                    "equicorrelation rho0 = {rho0} must lie in ({lo}, 1) for M = {m}"
                ));
            }
        }
        Ok(())
    }

    /// Second-moment matrix of one population row. The orthonormal family
    /// uses the standard Gaussian row law it is built from.
    pub fn population_gram(&self, m: usize) -> DMatrix<f64> {
        match *self {
            Design::Equicorrelated { rho0 } => {
                DMatrix::from_fn(m, m, |j, k| if j == k { 1.0 } else { rho0 })
            }
            _ => DMatrix::identity(m, m),
        }
    }

    fn cholesky(&self, m: usize) -> Option<DMatrix<f64>> {
        match self {
            Design::Equicorrelated { .. } => Some(
                self.population_gram(m)
                    .cholesky()
                    .expect("validated correlation is positive definite")
                    .l(),
            ),
            _ => None,
        }
    }

    fn sample_row(&self, rng: &mut ChaCha8Rng, chol: Option<&DMatrix<f64>>, out: &mut [f64]) {
        match self {
            Design::Rademacher => out.iter_mut().for_each(|v| *v = sign(rng)),
            _ => {
                out.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                if let Some(l) = chol {
                    let z = DVector::from_column_slice(out);
                    out.copy_from_slice((l * z).as_slice());
                }
            }
        }
    }
}

fn sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignSpec {
    #[default]
    Random,
    /// All positive.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaStarSpec {
    pub magnitude: f64,
    #[serde(default)]
    pub signs: SignSpec,
}

/// Symmetric noise laws. A zero scale gives noiseless data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Noise {
    Gaussian { sigma: f64 },
    Laplace { scale: f64 },
    Cauchy { scale: f64 },
    StudentT { df: f64, scale: f64 },
}

impl Noise {
    fn scale(&self) -> f64 {
        match *self {
            Noise::Gaussian { sigma } => sigma,
            Noise::Laplace { scale } | Noise::Cauchy { scale } | Noise::StudentT { scale, .. } => scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.scale();
        if !(s.is_finite() && s >= 0.0) {
            return invalid(format!("noise scale must be finite and nonnegative, got {s}"));
        }
        if let Noise::StudentT { df, .. } = *self {
            if !(df.is_finite() && df > 0.0) {
                return invalid(format!("Student t degrees of freedom must be positive, got {df}"));
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let s = self.scale();
        if s == 0.0 {
            return 0.0;
        }
        match *self {
            Noise::Gaussian { .. } => s * rng.sample::<f64, _>(StandardNormal),
            Noise::Laplace { .. } => {
                let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
                -s * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Noise::Cauchy { .. } => Cauchy::new(0.0, s).expect("validated scale").sample(rng),
            Noise::StudentT { df, .. } => s * StudentT::new(df).expect("validated df").sample(rng),
        }
    }

    /// `P(|W| <= a)`.
    pub fn prob_abs_le(&self, a: f64) -> f64 {
        let s = self.scale();
        if a < 0.0 {
            return 0.0;
        }
        if s == 0.0 {
            return 1.0;
        }
        let t = a / s;
        match *self {
            Noise::Gaussian { .. } => erf(t / std::f64::consts::SQRT_2),
            Noise::Laplace { .. } => 1.0 - (-t).exp(),
            Noise::Cauchy { .. } => 2.0 / std::f64::consts::PI * t.atan(),
            Noise::StudentT { df, .. } => {
                2.0 * StudentsT::new(0.0, 1.0, df).expect("validated df").cdf(t) - 1.0
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Noise::Gaussian { sigma } => format!("gaussian({sigma})"),
            Noise::Laplace { scale } => format!("laplace({scale})"),
            Noise::Cauchy { scale } => format!("cauchy({scale})"),
            Noise::StudentT { df, scale } => format!("student_t({df},{scale})"),
        }
    }
}

/// How the constraint radius is chosen for each replication.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RPolicy {
    /// `6 ||d gamma||_inf r_tilde(L, M, n)`; Huber only.
    Theoretical,
    /// `multiplier * sqrt(log M / n)`.
    Scaled { multiplier: f64 },
    Fixed { value: f64 },
}

/// Threshold `tau` applied to the fit before comparing signs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThresholdPolicy {
    /// `tau = multiplier * r`.
    Multiple { multiplier: f64 },
    /// `tau = C4 r` from the constants chain with the given `beta`; Huber only.
    Theoretical { beta: f64 },
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::Multiple { multiplier: 1.0 }
    }
}

fn default_eval_sample() -> usize {
    100_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    #[serde(alias = "M")]
    pub m: usize,
    pub s: usize,
    pub design: Design,
    pub theta_star: ThetaStarSpec,
    pub noise: Noise,
    pub loss: LossSpec,
    pub r_policy: RPolicy,
    #[serde(default)]
    pub threshold: ThresholdPolicy,
    #[serde(default)]
    pub box_policy: BoxPolicy,
    /// Redraw columns until every pairwise coherence is at most this value
    /// (Rademacher and Gaussian designs only).
    #[serde(default)]
    pub max_coherence: Option<f64>,
    pub reps: usize,
    pub seed: u64,
    /// Fresh-sample size of the excess-risk estimate; 0 skips it.
    #[serde(default = "default_eval_sample")]
    pub eval_sample: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return invalid("n and M must be positive");
        }
        if self.s > self.m {
            return invalid(format!("s = {} exceeds M = {}", self.s, self.m));
        }
        if self.reps == 0 {
            return invalid("reps must be at least 1");
        }
        self.design.validate(self.m)?;
        if self.design == Design::Orthonormal && self.n < self.m {
            return invalid(format!("orthonormal design needs n >= M, got n = {} < M = {}", self.n, self.m));
        }
        let mag = self.theta_star.magnitude;
        if !(mag.is_finite() && mag > 0.0) {
            return invalid(format!("theta* magnitude must be positive, got {mag}"));
        }
        self.noise.validate()?;
        self.loss.validate()?;
        self.box_policy.validate()?;
        if matches!(self.loss, LossSpec::Logistic { .. }) {
            return Err(DantzigError::UnsupportedLoss(
                "simulations cover the Huber and quadratic losses only",
            ));
        }
        match self.r_policy {
            RPolicy::Theoretical => {
                if !matches!(self.loss, LossSpec::Huber { .. }) {
                    return invalid("the theoretical radius needs the Huber loss");
                }
                if self.m < 2 {
                    return invalid("the theoretical radius needs M >= 2");
                }
            }
            RPolicy::Scaled { multiplier } => {
                if !(multiplier.is_finite() && multiplier > 0.0) {
                    return invalid(format!("r multiplier must be positive, got {multiplier}"));
                }
                if self.m < 2 {
                    return invalid("the scaled radius needs M >= 2");
                }
            }
            RPolicy::Fixed { value } => {
                if !(value.is_finite() && value > 0.0) {
                    return invalid(format!("fixed r must be positive, got {value}"));
                }
            }
        }
        match self.threshold {
            ThresholdPolicy::Multiple { multiplier } => {
                if !(multiplier.is_finite() && multiplier >= 0.0) {
                    return invalid(format!("threshold multiplier must be nonnegative, got {multiplier}"));
                }
            }
            ThresholdPolicy::Theoretical { beta } => {
                if !matches!(self.loss, LossSpec::Huber { .. }) {
                    return invalid("the theoretical threshold needs the Huber loss");
                }
                if !(beta > 1.0) {
                    return invalid(format!("beta must exceed 1, got {beta}"));
                }
                if self.m < 2 {
                    return invalid("the theoretical threshold needs M >= 2");
                }
            }
        }
        if let Some(c) = self.max_coherence {
            if !matches!(self.design, Design::Rademacher | Design::GaussianNormalized) {
                return invalid("max_coherence applies to the rademacher and gaussian_normalized designs");
            }
            if !(c > 0.0) {
                return invalid(format!("max_coherence must be positive, got {c}"));
            }
        }
        Ok(())
    }

    /// `P(|W| <= alpha)` and `P(|W| <= 2K + alpha)` for the Huber loss.
    pub fn noise_probabilities(&self) -> Option<(f64, f64)> {
        match self.loss {
            LossSpec::Huber { alpha, .. } => Some((
                self.noise.prob_abs_le(alpha),
                self.noise.prob_abs_le(self.loss.clip().unwrap()),
            )),
            _ => None,
        }
    }

    /// Radius for a generated dataset (the theoretical policy depends on `L`).
    pub fn radius(&self, ds: &Dataset) -> Result<f64> {
        match self.r_policy {
            RPolicy::Theoretical => Ok(tuning(&self.loss, ds.l_bound(), self.m, self.n)?.r),
            RPolicy::Scaled { multiplier } => {
                Ok(multiplier * ((self.m as f64).ln() / self.n as f64).sqrt())
            }
            RPolicy::Fixed { value } => Ok(value),
        }
    }

    fn threshold_for(&self, ds: &Dataset, r: f64) -> Result<f64> {
        match self.threshold {
            ThresholdPolicy::Multiple { multiplier } => Ok(multiplier * r),
            ThresholdPolicy::Theoretical { beta } => {
                let LossSpec::Huber { k_bound, alpha } = self.loss else {
                    unreachable!("validated")
                };
                let (p_alpha, p_clip) = self.noise_probabilities().unwrap();
                let rep = constants_chain(&ConstantsInputs {
                    l_bound: ds.l_bound(),
                    k_bound,
                    alpha,
                    m: self.m,
                    n: self.n,
                    s: self.s.max(1),
                    beta,
                    p_alpha,
                    p_clip,
                })?;
                Ok(rep.c4 * r)
            }
        }
    }
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const MAX_COLUMN_DRAWS: usize = 100_000;

fn draw_design(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    let (n, m) = (cfg.n, cfg.m);
    let mut x = match cfg.design {
        Design::Orthonormal => {
            let z = DMatrix::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal));
            z.qr().q() * (n as f64).sqrt()
        }
        Design::Equicorrelated { .. } => {
            let l = cfg.design.cholesky(m).unwrap();
            DMatrix::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal)) * l.transpose()
        }
        Design::GaussianNormalized | Design::Rademacher => {
            let mut x = DMatrix::zeros(n, m);
            let mut col = vec![0.0; n];
            for j in 0..m {
                let mut draws = 0;
                loop {
                    draws += 1;
                    for v in col.iter_mut() {
                        *v = match cfg.design {
                            Design::Rademacher => sign(rng),
                            _ => rng.sample(StandardNormal),
                        };
                    }
                    let norm = (col.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
                    if norm == 0.0 {
                        continue;
                    }
                    col.iter_mut().for_each(|v| *v /= norm);
                    let Some(limit) = cfg.max_coherence else { break };
                    let ok = (0..j).all(|k| {
                        let dot: f64 = x.column(k).iter().zip(&col).map(|(a, b)| a * b).sum();
                        (dot / n as f64).abs() <= limit
                    });
                    if ok {
                        break;
                    }
                    if draws >= MAX_COLUMN_DRAWS {
                        return invalid(format!(
                            "no column {j} with coherence <= {limit} after {MAX_COLUMN_DRAWS} draws"
                        ));
                    }
                }
                x.column_mut(j).copy_from_slice(&col);
            }
            return Ok(x);
        }
    };
    for mut c in x.column_iter_mut() {
        let norm = (c.norm_squared() / n as f64).sqrt();
        c /= norm;
    }
    Ok(x)
}

/// Dataset and `theta*` of replication `rep`. The design has unit empirical
/// column norms and `L` equal to its largest absolute entry; `theta*` lives
/// in those normalized coordinates.
pub fn generate(cfg: &SimConfig, rep: u64) -> Result<(Dataset, CoefVector)> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, 2 * rep);
    let x = draw_design(cfg, &mut rng)?;
    let mut theta = vec![0.0; cfg.m];
    for j in rand::seq::index::sample(&mut rng, cfg.m, cfg.s).into_iter() {
        theta[j] = cfg.theta_star.magnitude
            * match cfg.theta_star.signs {
                SignSpec::Random => sign(&mut rng),
                SignSpec::Fixed => 1.0,
            };
    }
    let theta = CoefVector::from_vec(theta);
    let mut y = &x * theta.as_vector();
    y.iter_mut().for_each(|v| *v += cfg.noise.sample(&mut rng));
    let l = x.amax();
    let ds = Dataset::new(x, y, l)?.assume_normalized()?;
    Ok((ds, theta))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub se: f64,
}

/// Fresh-sample estimate of `R(theta) - R(theta*)` with its standard error,
/// drawing `eval_sample` rows from the population law of the design.
pub fn excess_risk_mc(theta: &CoefVector, theta_star: &CoefVector, cfg: &SimConfig, rep: u64) -> Result<McEstimate> {
    if matches!(cfg.loss, LossSpec::Logistic { .. }) {
        return Err(DantzigError::UnsupportedLoss("excess risk is estimated for Huber and quadratic losses"));
    }
    for t in [theta, theta_star] {
        if t.len() != cfg.m {
            return Err(DantzigError::DimensionMismatch {
                what: "coefficient vector length",
                expected: cfg.m,
                got: t.len(),
            });
        }
    }
    let n = cfg.eval_sample;
    if n == 0 {
        return Ok(McEstimate { value: f64::NAN, se: f64::NAN });
    }
    let mut rng = stream(cfg.seed, 2 * rep + 1);
    let chol = cfg.design.cholesky(cfg.m);
    let mut row = vec![0.0; cfg.m];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        cfg.design.sample_row(&mut rng, chol.as_ref(), &mut row);
        let dot = |t: &CoefVector| row.iter().zip(t.iter()).map(|(a, b)| a * b).sum::<f64>();
        let f_star = dot(theta_star);
        let y = f_star + cfg.noise.sample(&mut rng);
        let d = loss_value(&cfg.loss, y, dot(theta)) - loss_value(&cfg.loss, y, f_star);
        sum += d;
        sum_sq += d * d;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 { ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    Ok(McEstimate { value: mean, se: (var / nf).sqrt() })
}

/// `||f_theta - f_theta*||^2` under the population design law.
pub fn population_norm_sq(design: &Design, delta: &CoefVector) -> f64 {
    let d = delta.as_vector();
    d.dot(&(design.population_gram(d.len()) * d))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum RepStatus {
    Exact,
    PatternConverged,
    BestEffort,
    Failed(String),
}

impl RepStatus {
    pub fn label(&self) -> String {
        match self {
            RepStatus::Exact => "exact".into(),
            RepStatus::PatternConverged => "pattern_converged".into(),
            RepStatus::BestEffort => "best_effort".into(),
            RepStatus::Failed(msg) => format!("failed: {msg}"),
        }
    }
}

/// One replication. Error fields are NaN when the fit failed.
#[derive(Clone, Debug, Serialize)]
pub struct RepResult {
    pub rep: u64,
    pub r: f64,
    pub tau: f64,
    pub sup_err: f64,
    pub l1_err: f64,
    pub excess_risk: f64,
    pub excess_risk_se: f64,
    /// `sign(theta_tilde) == sign(theta*)` for the thresholded fit.
    pub sign_exact: bool,
    pub support_exact: bool,
    /// `|grad R_n(theta*)|_inf <= r`.
    pub theta_star_feasible: bool,
    /// `|theta_hat|_1 <= |theta*|_1`.
    pub l1_dominated: bool,
    /// `|Delta_J|_1` and `|Delta_{J^c}|_1` for `J = supp(theta*)`.
    pub cone_on: f64,
    pub cone_off: f64,
    pub pattern_iters: usize,
    pub status: RepStatus,
}

fn fit(cfg: &SimConfig, ds: &Dataset, r: f64) -> Result<DantzigFit> {
    match cfg.loss {
        LossSpec::Huber { .. } => fit_dantzig_huber(ds, r, &cfg.loss, cfg.box_policy),
        LossSpec::Quadratic => fit_dantzig_quadratic(ds, r, cfg.box_policy),
        LossSpec::Logistic { .. } => unreachable!("validated"),
    }
}

fn run_rep(cfg: &SimConfig, rep: u64) -> RepResult {
    let mut out = RepResult {
        rep,
        r: f64::NAN,
        tau: f64::NAN,
        sup_err: f64::NAN,
        l1_err: f64::NAN,
        excess_risk: f64::NAN,
        excess_risk_se: f64::NAN,
        sign_exact: false,
        support_exact: false,
        theta_star_feasible: false,
        l1_dominated: false,
        cone_on: f64::NAN,
        cone_off: f64::NAN,
        pattern_iters: 0,
        status: RepStatus::Failed(String::new()),
    };
    let attempt = |out: &mut RepResult| -> Result<()> {
        let (ds, theta_star) = generate(cfg, rep)?;
        let r = cfg.radius(&ds)?;
        out.r = r;
        out.theta_star_feasible = gradient_sup_norm(&ds, &theta_star, &cfg.loss)? <= r;
        out.tau = cfg.threshold_for(&ds, r)?;
        let f = fit(cfg, &ds, r)?;
        let delta = f.theta.sub(&theta_star);
        out.sup_err = delta.linf_norm();
        out.l1_err = delta.l1_norm();
        out.l1_dominated = f.l1_norm <= theta_star.l1_norm();
        let on: Vec<bool> = theta_star.iter().map(|v| *v != 0.0).collect();
        out.cone_on = delta.iter().zip(&on).filter(|(_, o)| **o).map(|(d, _)| d.abs()).sum();
        out.cone_off = delta.iter().zip(&on).filter(|(_, o)| !**o).map(|(d, _)| d.abs()).sum();
        let tilde = threshold_estimator(&f.theta, out.tau);
        out.sign_exact = tilde.sign_vector() == theta_star.sign_vector();
        out.support_exact = tilde.support() == theta_star.support();
        let est = excess_risk_mc(&f.theta, &theta_star, cfg, rep)?;
        out.excess_risk = est.value;
        out.excess_risk_se = est.se;
        out.pattern_iters = f.pattern_iters;
        out.status = match f.status {
            crate::dantzig::FitStatus::Exact => RepStatus::Exact,
            crate::dantzig::FitStatus::PatternConverged => RepStatus::PatternConverged,
            crate::dantzig::FitStatus::BestEffort => RepStatus::BestEffort,
        };
        Ok(())
    };
    if let Err(e) = attempt(&mut out) {
        log::debug!("rep {rep} failed: {e}");
        out.status = RepStatus::Failed(e.to_string());
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quantiles {
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
}

impl Quantiles {
    /// Over the finite values only; NaN when there are none.
    pub fn of(values: impl Iterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.filter(|v| v.is_finite()).collect();
        let mut d = Data::new(v);
        Quantiles {
            median: d.quantile(0.5),
            q10: d.quantile(0.1),
            q90: d.quantile(0.9),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub reps: usize,
    pub failures: usize,
    pub r_median: f64,
    pub sup_err: Quantiles,
    pub l1_err: Quantiles,
    pub excess_risk: Quantiles,
    /// Failed reps count as misses.
    pub sign_exact_freq: f64,
    pub support_exact_freq: f64,
    pub feasible_freq: f64,
}

impl Summary {
    pub fn of(results: &[RepResult]) -> Self {
        let k = results.len().max(1) as f64;
        let freq = |f: fn(&RepResult) -> bool| results.iter().filter(|r| f(r)).count() as f64 / k;
        Summary {
            reps: results.len(),
            failures: results.iter().filter(|r| matches!(r.status, RepStatus::Failed(_))).count(),
            r_median: Quantiles::of(results.iter().map(|r| r.r)).median,
            sup_err: Quantiles::of(results.iter().map(|r| r.sup_err)),
            l1_err: Quantiles::of(results.iter().map(|r| r.l1_err)),
            excess_risk: Quantiles::of(results.iter().map(|r| r.excess_risk)),
            sign_exact_freq: freq(|r| r.sign_exact),
            support_exact_freq: freq(|r| r.support_exact),
            feasible_freq: freq(|r| r.theta_star_feasible),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Experiment {
    pub config: SimConfig,
    pub results: Vec<RepResult>,
    pub summary: Summary,
}

/// Runs `cfg.reps` replications in parallel on the current rayon pool.
pub fn run_experiment(cfg: &SimConfig) -> Result<Experiment> {
    cfg.validate()?;
    let results: Vec<RepResult> = (0..cfg.reps as u64).into_par_iter().map(|rep| run_rep(cfg, rep)).collect();
    let summary = Summary::of(&results);
    Ok(Experiment {
        config: cfg.clone(),
        results,
        summary,
    })
}

/// Overrides applied to a base configuration. `multiplier` switches the
/// radius to `Scaled { multiplier }`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimDelta {
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default, alias = "M")]
    pub m: Option<usize>,
    #[serde(default)]
    pub s: Option<usize>,
    #[serde(default)]
    pub noise: Option<Noise>,
    #[serde(default)]
    pub loss: Option<LossSpec>,
    #[serde(default)]
    pub multiplier: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl SimDelta {
    pub fn apply(&self, base: &SimConfig) -> SimConfig {
        let mut c = base.clone();
        if let Some(v) = self.n {
            c.n = v;
        }
        if let Some(v) = self.m {
            c.m = v;
        }
        if let Some(v) = self.s {
            c.s = v;
        }
        if let Some(v) = self.noise {
            c.noise = v;
        }
        if let Some(v) = self.loss {
            c.loss = v;
        }
        if let Some(v) = self.multiplier {
            c.r_policy = RPolicy::Scaled { multiplier: v };
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        c
    }
}

/// Cartesian grid; an empty axis keeps the base value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default, alias = "M")]
    pub m: Vec<usize>,
    #[serde(default)]
    pub s: Vec<usize>,
    #[serde(default)]
    pub noise: Vec<Noise>,
    #[serde(default)]
    pub loss: Vec<LossSpec>,
    #[serde(default)]
    pub multiplier: Vec<f64>,
    #[serde(default)]
    pub seed: Vec<u64>,
}

fn axis<T: Clone>(values: &[T]) -> Vec<Option<T>> {
    if values.is_empty() {
        vec![None]
    } else {
        values.iter().cloned().map(Some).collect()
    }
}

impl SweepGrid {
    /// Cells in row-major order, the last axis (`seed`) varying fastest.
    pub fn cells(&self) -> Vec<SimDelta> {
        let mut out = Vec::new();
        for n in axis(&self.n) {
            for m in axis(&self.m) {
                for s in axis(&self.s) {
                    for noise in axis(&self.noise) {
                        for loss in axis(&self.loss) {
                            for multiplier in axis(&self.multiplier) {
                                for seed in axis(&self.seed) {
                                    out.push(SimDelta { n, m, s, noise, loss, multiplier, seed });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// A base configuration with grid cells followed by listed cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: SimConfig,
    #[serde(default)]
    pub grid: Option<SweepGrid>,
    #[serde(default)]
    pub cells: Vec<SimDelta>,
}

impl SweepConfig {
    pub fn deltas(&self) -> Vec<SimDelta> {
        let mut d = self.grid.as_ref().map(SweepGrid::cells).unwrap_or_default();
        d.extend(self.cells.iter().cloned());
        d
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CellResult {
    pub cell_id: usize,
    pub config: SimConfig,
    /// Error message when the cell configuration is invalid.
    pub outcome: std::result::Result<Experiment, String>,
}

/// One experiment per delta. Invalid cells are reported, not fatal.
pub fn sweep(base: &SimConfig, deltas: &[SimDelta]) -> Vec<CellResult> {
    deltas
        .iter()
        .enumerate()
        .map(|(cell_id, d)| {
            let config = d.apply(base);
            let outcome = run_experiment(&config).map_err(|e| e.to_string());
            CellResult { cell_id, config, outcome }
        })
        .collect()
}

/// One CSV line of the long-format results. `rep` is the replication index
/// or `summary`; on summary lines the error columns hold medians and the
/// boolean columns frequencies.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LongRow {
    pub cell_id: usize,
    pub rep: String,
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub s: usize,
    pub noise: String,
    pub loss: String,
    pub r: f64,
    pub sup_err: f64,
    pub l1_err: f64,
    pub excess_risk: f64,
    pub sign_exact: f64,
    pub feasible: f64,
    pub status: String,
}

fn loss_label(loss: &LossSpec) -> String {
    match *loss {
        LossSpec::Huber { k_bound, alpha } => format!("huber({k_bound},{alpha})"),
        _ => loss.name().to_string(),
    }
}

/// Per-rep rows followed by one summary row for every cell.
pub fn long_rows(cells: &[CellResult]) -> Vec<LongRow> {
    let mut rows = Vec::new();
    for cell in cells {
        let c = &cell.config;
        let row = |rep: String, r, sup, l1, ex, sign: f64, feas: f64, status: String| LongRow {
            cell_id: cell.cell_id,
            rep,
            n: c.n,
            m: c.m,
            s: c.s,
            noise: c.noise.label(),
            loss: loss_label(&c.loss),
            r,
            sup_err: sup,
            l1_err: l1,
            excess_risk: ex,
            sign_exact: sign,
            feasible: feas,
            status,
        };
        let b = |v: bool| if v { 1.0 } else { 0.0 };
        match &cell.outcome {
            Ok(exp) => {
                for res in &exp.results {
                    rows.push(row(
                        res.rep.to_string(),
                        res.r,
                        res.sup_err,
                        res.l1_err,
                        res.excess_risk,
                        b(res.sign_exact),
                        b(res.theta_star_feasible),
                        res.status.label(),
                    ));
                }
                let s = &exp.summary;
                rows.push(row(
                    "summary".into(),
                    s.r_median,
                    s.sup_err.median,
                    s.l1_err.median,
                    s.excess_risk.median,
                    s.sign_exact_freq,
                    s.feasible_freq,
                    format!("ok {}/{}", s.reps - s.failures, s.reps),
                ));
            }
            Err(msg) => rows.push(row(
                "summary".into(),
                f64::NAN,
                f64::NAN,
                f64::NAN,
                f64::NAN,
                f64::NAN,
                f64::NAN,
                format!("invalid: {msg}"),
            )),
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn base() -> SimConfig {
        SimConfig {
            n: 64,
            m: 8,
            s: 1,
            design: Design::Orthonormal,
            theta_star: ThetaStarSpec { magnitude: 1.0, signs: SignSpec::Random },
            noise: Noise::Gaussian { sigma: 0.0 },
            loss: LossSpec::Quadratic,
            r_policy: RPolicy::Fixed { value: 0.05 },
            threshold: ThresholdPolicy::default(),
            box_policy: BoxPolicy::None,
            max_coherence: None,
            reps: 10,
            seed: 11,
            eval_sample: 2000,
        }
    }

    #[test]
    fn noiseless_orthonormal_response_is_scaled_column() {
        let (ds, theta) = generate(&base(), 3).unwrap();
        let j = theta.support()[0];
        let want = ds.x().column(j) * theta[j];
        assert_eq!(ds.y(), &want);
        let g = ds.x().tr_mul(ds.x()) / 64.0;
        assert!((g - DMatrix::<f64>::identity(8, 8)).amax() < 1e-12);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SimConfig { noise: Noise::Cauchy { scale: 1.0 }, ..base() };
        let (a, ta) = generate(&cfg, 5).unwrap();
        let (b, tb) = generate(&cfg, 5).unwrap();
        assert_eq!(a.x(), b.x());
        assert_eq!(a.y(), b.y());
        assert_eq!(ta, tb);
        let (c, _) = generate(&cfg, 6).unwrap();
        assert_ne!(a.y(), c.y());
    }

    #[test]
    fn designs_are_normalized() {
        for design in [
            Design::Orthonormal,
            Design::GaussianNormalized,
            Design::Equicorrelated { rho0: 0.3 },
            Design::Equicorrelated { rho0: -0.1 },
            Design::Rademacher,
        ] {
            let cfg = SimConfig { design, ..base() };
            let (ds, _) = generate(&cfg, 0).unwrap();
            for v in ds.column_norms() {
                assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn coherence_rejection() {
        let cfg = SimConfig {
            design: Design::Rademacher,
            max_coherence: Some(0.25),
            ..base()
        };
        let (ds, _) = generate(&cfg, 0).unwrap();
        let g = crate::diagnostics::gram(&ds).unwrap();
        assert!(crate::diagnostics::coherence(&g).max_offdiag <= 0.25);
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig { reps: 0, ..base() }.validate().is_err());
        assert!(SimConfig { s: 9, ..base() }.validate().is_err());
        assert!(SimConfig { n: 4, ..base() }.validate().is_err());
        assert!(SimConfig { design: Design::Equicorrelated { rho0: -0.2 }, ..base() }.validate().is_err());
        assert!(SimConfig { r_policy: RPolicy::Theoretical, ..base() }.validate().is_err());
        assert!(SimConfig { loss: LossSpec::Logistic { k_bound: 1.0 }, ..base() }.validate().is_err());
        assert!(SimConfig { max_coherence: Some(0.1), ..base() }.validate().is_err());
    }

    #[test]
    fn noise_probabilities_closed_form() {
        let g = Noise::Gaussian { sigma: 2.0 };
        assert_abs_diff_eq!(g.prob_abs_le(2.0 * 1.959963984540054), 0.95, epsilon = 1e-10);
        assert_abs_diff_eq!(Noise::Laplace { scale: 1.0 }.prob_abs_le(2f64.ln()), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(Noise::Cauchy { scale: 3.0 }.prob_abs_le(3.0), 0.5, epsilon = 1e-15);
        // t with 1 degree of freedom is Cauchy
        assert_abs_diff_eq!(
            Noise::StudentT { df: 1.0, scale: 2.0 }.prob_abs_le(5.0),
            Noise::Cauchy { scale: 2.0 }.prob_abs_le(5.0),
            epsilon = 1e-9
        );
        assert_eq!(Noise::Gaussian { sigma: 0.0 }.prob_abs_le(0.0), 1.0);
    }

    #[test]
    fn noise_samples_match_probabilities() {
        let mut rng = stream(1, 0);
        for noise in [
            Noise::Gaussian { sigma: 0.7 },
            Noise::Laplace { scale: 0.7 },
            Noise::Cauchy { scale: 0.7 },
            Noise::StudentT { df: 3.0, scale: 0.7 },
        ] {
            let k = 200_000;
            let hits = (0..k).filter(|_| noise.sample(&mut rng).abs() <= 0.5).count() as f64 / k as f64;
            let p = noise.prob_abs_le(0.5);
            assert!((hits - p).abs() < 4.0 * (p * (1.0 - p) / k as f64).sqrt() + 1e-4, "{noise:?}");
        }
    }

    #[test]
    fn excess_risk_examples() {
        let cfg = SimConfig { noise: Noise::Gaussian { sigma: 1.0 }, eval_sample: 200_000, ..base() };
        let star = CoefVector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.5]);
        let zero = excess_risk_mc(&star, &star, &cfg, 0).unwrap();
        assert_eq!(zero.value, 0.0);
        let mut e1 = star.as_vector().clone();
        e1[0] += 1.0;
        let est = excess_risk_mc(&CoefVector::from(e1), &star, &cfg, 0).unwrap();
        assert!((est.value - 0.5).abs() <= 3.0 * est.se, "{est:?}");
    }

    #[test]
    fn noiseless_orthonormal_experiment_recovers_signs() {
        let exp = run_experiment(&base()).unwrap();
        assert_eq!(exp.summary.sign_exact_freq, 1.0);
        assert_eq!(exp.summary.failures, 0);
        for r in &exp.results {
            assert!(r.sup_err <= 0.05 + 1e-9);
        }
    }

    #[test]
    fn huge_radius_gives_zero_fit() {
        let cfg = SimConfig { r_policy: RPolicy::Fixed { value: 10.0 }, ..base() };
        let exp = run_experiment(&cfg).unwrap();
        assert_eq!(exp.summary.sign_exact_freq, 0.0);
        for r in &exp.results {
            assert_abs_diff_eq!(r.sup_err, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn experiment_is_deterministic() {
        let cfg = SimConfig {
            noise: Noise::Laplace { scale: 0.3 },
            loss: LossSpec::huber(1.0, 0.5).unwrap(),
            ..base()
        };
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn sweep_shapes() {
        let cfg = SimConfig { reps: 2, ..base() };
        assert!(sweep(&cfg, &[]).is_empty());
        let grid = SweepGrid { n: vec![64, 128], ..Default::default() };
        let cells = sweep(&cfg, &grid.cells());
        let rows = long_rows(&cells);
        assert_eq!(rows.iter().filter(|r| r.rep == "summary").count(), 2);
        assert_eq!(rows.len(), 6);
        let bad = sweep(&cfg, &[SimDelta { s: Some(100), ..Default::default() }]);
        assert!(bad[0].outcome.is_err());
        assert!(long_rows(&bad)[0].status.starts_with("invalid"));
    }

    #[test]
    fn config_json_round_trip() {
        let json = r#"{
            "n": 200, "M": 20, "s": 2,
            "design": {"kind": "gaussian_normalized"},
            "theta_star": {"magnitude": 1.0},
            "noise": {"kind": "gaussian", "sigma": 0.5},
            "loss": {"kind": "huber", "k_bound": 1.0, "alpha": 0.5},
            "r_policy": {"kind": "scaled", "multiplier": 1.0},
            "reps": 50, "seed": 7
        }"#;
        let cfg: SimConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.m, 20);
        assert_eq!(cfg.eval_sample, 100_000);
        assert_eq!(cfg.threshold, ThresholdPolicy::Multiple { multiplier: 1.0 });
        let back: SimConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let err = serde_json::from_str::<SimConfig>(&json.replace("\"seed\"", "\"sede\"")).unwrap_err();
        assert!(err.to_string().contains("sede"));
    }
}
