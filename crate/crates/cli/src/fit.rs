use gdantzig::dantzig::{fit_dantzig_huber, fit_dantzig_quadratic, threshold_estimator, FitStatus};
use gdantzig::diagnostics::{constants_chain, tuning, ConstantsInputs, ConstantsReport, Tuning};
use gdantzig::{BoxPolicy, LossSpec};
use serde::Serialize;

use crate::error::{usage, Failure};
use crate::input::read_normalized;
use crate::options::box_policy;
use crate::{write_json, ConstantsArgs, FitArgs, RArg};

#[derive(Serialize)]
struct FitResponse {
    input: String,
    features: Vec<String>,
    loss: LossSpec,
    n: usize,
    #[serde(rename = "M")]
    m: usize,
    /// Largest absolute entry of the normalized design.
    l_bound: f64,
    r_used: f64,
    r_source: &'static str,
    box_policy: BoxPolicy,
    /// Original column units, before thresholding.
    theta: Vec<f64>,
    theta_normalized: Vec<f64>,
    /// Original column units, entries with normalized magnitude <= tau zeroed.
    theta_thresholded: Vec<f64>,
    tau: f64,
    support: Vec<usize>,
    signs: Vec<i8>,
    grad_inf_norm: f64,
    l1_norm: f64,
    status: FitStatus,
    pattern_iters: usize,
    column_scales: Vec<f64>,
    tuning: Option<Tuning>,
    constants: Option<ConstantsReport>,
}

fn constants(
    c: &ConstantsArgs,
    loss: &LossSpec,
    l_bound: f64,
    m: usize,
    n: usize,
) -> Result<Option<ConstantsReport>, Failure> {
    let (Some(p_alpha), Some(p_clip), Some(s)) = (c.p_alpha, c.p_clip, c.s) else {
        return Ok(None);
    };
    let LossSpec::Huber { k_bound, alpha } = *loss else {
        return usage("the constants chain is available for the Huber loss only");
    };
    let report = constants_chain(&ConstantsInputs {
        l_bound,
        k_bound,
        alpha,
        m,
        n,
        s,
        beta: c.beta,
        p_alpha,
        p_clip,
    })?;
    Ok(Some(report))
}

pub fn run(a: &FitArgs) -> Result<(), Failure> {
    let loss = a.loss.spec()?;
    if matches!(loss, LossSpec::Logistic { .. }) {
        return usage("the logistic loss supports diagnostics only; use `gdantzig diagnose --loss logistic-diag`");
    }
    if !(a.threshold_mult.is_finite() && a.threshold_mult >= 0.0) {
        return usage("--threshold-mult must be a nonnegative number");
    }
    let policy = box_policy(a.box_policy, a.loss.k_bound)?;
    let (table, ds) = read_normalized(&a.input)?;
    let (n, m) = (ds.n(), ds.m());

    let (r, r_source, tune) = match a.r {
        RArg::Value(v) => (v, "user", None),
        RArg::Auto => {
            if matches!(loss, LossSpec::Quadratic) {
                return usage("--r auto is undefined for the quadratic loss (no Lipschitz bound); pass an explicit --r");
            }
            let t = tuning(&loss, ds.l_bound(), m, n)?;
            (t.r, "auto", Some(t))
        }
    };
    let consts = constants(&a.constants, &loss, ds.l_bound(), m, n)?;
    let tau = if a.theoretical_threshold {
        match &consts {
            Some(c) => c.c4 * r,
            None => return usage("--theoretical-threshold needs --p-alpha, --p-clip and --s"),
        }
    } else {
        a.threshold_mult * r
    };

    let fit = match loss {
        LossSpec::Huber { .. } => fit_dantzig_huber(&ds, r, &loss, policy)?,
        _ => fit_dantzig_quadratic(&ds, r, policy)?,
    };
    if fit.status == FitStatus::BestEffort {
        log::warn!("pattern search did not converge; reporting the best feasible iterate");
    }
    let tilde = threshold_estimator(&fit.theta, tau);
    let response = FitResponse {
        input: a.input.display().to_string(),
        features: table.features,
        loss,
        n,
        m,
        l_bound: ds.l_bound(),
        r_used: fit.r_used,
        r_source,
        box_policy: policy,
        theta: ds.to_original_coordinates(&fit.theta).as_slice().to_vec(),
        theta_normalized: fit.theta.as_slice().to_vec(),
        theta_thresholded: ds.to_original_coordinates(&tilde).as_slice().to_vec(),
        tau,
        support: tilde.support(),
        signs: tilde.sign_vector(),
        grad_inf_norm: fit.grad_inf_norm,
        l1_norm: fit.l1_norm,
        status: fit.status,
        pattern_iters: fit.pattern_iters,
        column_scales: ds.column_scales().unwrap().to_vec(),
        tuning: tune,
        constants: consts,
    };
    write_json(&response, a.output.as_deref())
}
