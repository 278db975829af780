use gdantzig::diagnostics::{
    coherence, coherence_check, constants_chain, corollary_huber, corollary_logistic, gram, logit_phi_second,
    re_estimate, re_lower_bound, tau_logistic, tuning, Coherence, CoherenceVerdict, ConstantsInputs,
    ConstantsReport, OracleBounds, Tuning, RE_ESTIMATE_MAX_M,
};
use gdantzig::LossSpec;
use serde::Serialize;

use crate::error::{usage, Failure};
use crate::input::read_normalized;
use crate::options::loss_spec;
use crate::{write_json, DiagnoseArgs};

const RE_SAMPLES: usize = 200;

#[derive(Serialize)]
struct DiagnoseResponse {
    input: String,
    n: usize,
    #[serde(rename = "M")]
    m: usize,
    l_bound: f64,
    column_scales: Vec<f64>,
    /// Rows of `X^T X / n` for the normalized design.
    gram: Vec<Vec<f64>>,
    coherence: Coherence,
    s: usize,
    beta: f64,
    coherence_check: CoherenceVerdict,
    re_lower_bound: f64,
    /// Upper estimate of the restricted eigenvalue (M <= 12 only).
    re_upper_estimate: Option<f64>,
    loss: Option<LossSpec>,
    tuning: Option<Tuning>,
    tau_logistic: Option<f64>,
    constants: Option<ConstantsReport>,
    /// Oracle-inequality bounds at the tuning radius, using the coherence
    /// lower bound for the restricted eigenvalue.
    bounds: Option<OracleBounds>,
}

pub fn run(a: &DiagnoseArgs) -> Result<(), Failure> {
    if a.s == 0 {
        return usage("--s must be at least 1");
    }
    let loss = a.loss.map(|l| loss_spec(l, a.k_bound, a.alpha)).transpose()?;
    let (_, ds) = read_normalized(&a.input)?;
    let (n, m) = (ds.n(), ds.m());
    let g = gram(&ds)?;
    let verdict = coherence_check(&g, a.s, a.beta)?;
    let zeta = re_lower_bound(a.beta)?;
    let re_upper_estimate = if m <= RE_ESTIMATE_MAX_M && a.s <= m {
        Some(re_estimate(&g, a.s, RE_SAMPLES, a.seed)?)
    } else {
        None
    };

    let tune = match &loss {
        Some(l) if !matches!(l, LossSpec::Quadratic) => Some(tuning(l, ds.l_bound(), m, n)?),
        _ => None,
    };
    let tau = match loss {
        Some(LossSpec::Logistic { k_bound }) => Some(tau_logistic(k_bound, logit_phi_second)?),
        _ => None,
    };
    let constants = match (loss, a.p_alpha, a.p_clip) {
        (Some(LossSpec::Huber { k_bound, alpha }), Some(p_alpha), Some(p_clip)) => Some(constants_chain(&ConstantsInputs {
            l_bound: ds.l_bound(),
            k_bound,
            alpha,
            m,
            n,
            s: a.s,
            beta: a.beta,
            p_alpha,
            p_clip,
        })?),
        _ => None,
    };
    let bounds = match (loss, &tune) {
        (Some(LossSpec::Huber { k_bound, .. }), Some(t)) => match a.p_alpha {
            Some(p) => Some(corollary_huber(k_bound, p, zeta, a.s, t.r)?),
            None => None,
        },
        (Some(LossSpec::Logistic { k_bound }), Some(t)) => Some(corollary_logistic(k_bound, tau.unwrap(), zeta, a.s, t.r)?),
        _ => None,
    };

    let response = DiagnoseResponse {
        input: a.input.display().to_string(),
        n,
        m,
        l_bound: ds.l_bound(),
        column_scales: ds.column_scales().unwrap().to_vec(),
        gram: g.row_iter().map(|r| r.iter().copied().collect()).collect(),
        coherence: coherence(&g),
        s: a.s,
        beta: a.beta,
        coherence_check: verdict,
        re_lower_bound: zeta,
        re_upper_estimate,
        loss,
        tuning: tune,
        tau_logistic: tau,
        constants,
        bounds,
    };
    write_json(&response, a.output.as_deref())
}
