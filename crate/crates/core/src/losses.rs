//! Loss values, empirical risk, its gradient and the Huber empirical Hessian.
//!
//! Sign convention for the regression losses: `d/d theta_j Q = -psi(y_i - x_i.theta) x_ij`,
//! so the risk gradient is `-(1/n) X^T psi(residuals)`. The logistic loss
//! uses `(sigma(x_i.theta) - y_i) x_ij`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, DantzigError, Result};
use crate::types::{CoefVector, Dataset, LossSpec};

/// `phi'` for the Huber loss: the identity clipped to `[-clip, clip]`.
pub fn huber_psi(u: f64, clip: f64) -> f64 {
    debug_assert!(clip > 0.0);
    u.clamp(-clip, clip)
}

/// Huber `phi`: `u^2 / 2` inside the clip level, linear outside.
pub fn huber_phi(u: f64, clip: f64) -> f64 {
    let a = u.abs();
    if a <= clip {
        0.5 * u * u
    } else {
        clip * a - 0.5 * clip * clip
    }
}

/// `log(1 + e^u)` without overflow.
pub fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `gamma(y, u)` for one observation.
pub fn loss_value(loss: &LossSpec, y: f64, u: f64) -> f64 {
    match *loss {
        LossSpec::Quadratic => 0.5 * (y - u) * (y - u),
        LossSpec::Huber { .. } => huber_phi(y - u, loss.clip().unwrap()),
        LossSpec::Logistic { .. } => -y * u + softplus(u),
    }
}

/// `d gamma / du` for one observation.
pub fn loss_derivative(loss: &LossSpec, y: f64, u: f64) -> f64 {
    match *loss {
        LossSpec::Quadratic => u - y,
        LossSpec::Huber { .. } => -huber_psi(y - u, loss.clip().unwrap()),
        LossSpec::Logistic { .. } => sigmoid(u) - y,
    }
}

fn check_inputs(ds: &Dataset, theta: &CoefVector, loss: &LossSpec) -> Result<()> {
    loss.validate()?;
    ds.check_theta(theta)?;
    if matches!(loss, LossSpec::Logistic { .. }) {
        if let Some(y) = ds.y().iter().find(|&&y| y != 0.0 && y != 1.0) {
            return invalid(format!("logistic loss needs responses in {{0, 1}}, found {y}"));
        }
    }
    Ok(())
}

/// `R_n(theta) = (1/n) sum_i gamma(y_i, x_i.theta)`.
pub fn empirical_risk(ds: &Dataset, theta: &CoefVector, loss: &LossSpec) -> Result<f64> {
    check_inputs(ds, theta, loss)?;
    let fitted = ds.predict(theta);
    let total: f64 = fitted
        .iter()
        .zip(ds.y().iter())
        .map(|(&u, &y)| loss_value(loss, y, u))
        .sum();
    Ok(total / ds.n() as f64)
}

#[derive(Clone, Debug, Serialize)]
pub struct RiskReport {
    pub value: f64,
    pub grad: Vec<f64>,
    pub grad_inf_norm: f64,
}

/// Risk value together with its gradient.
pub fn risk_gradient(ds: &Dataset, theta: &CoefVector, loss: &LossSpec) -> Result<RiskReport> {
    check_inputs(ds, theta, loss)?;
    let n = ds.n() as f64;
    let fitted = ds.predict(theta);
    let mut value = 0.0;
    let derivs = DVector::from_fn(ds.n(), |i, _| {
        let (y, u) = (ds.y()[i], fitted[i]);
        value += loss_value(loss, y, u);
        loss_derivative(loss, y, u)
    });
    let grad = ds.x().tr_mul(&derivs) / n;
    let grad_inf_norm = grad.amax();
    Ok(RiskReport {
        value: value / n,
        grad: grad.as_slice().to_vec(),
        grad_inf_norm,
    })
}

/// `|grad R_n(theta)|_inf`, the quantity bounded by the Dantzig constraint.
pub fn gradient_sup_norm(ds: &Dataset, theta: &CoefVector, loss: &LossSpec) -> Result<f64> {
    Ok(risk_gradient(ds, theta, loss)?.grad_inf_norm)
}

/// Empirical Hessian of the Huber risk:
/// `(1/n) sum_i 1{|y_i - x_i.theta| <= clip} x_ij x_ik`.
///
/// Under the linear model `y_i - x_i.theta = f_{theta*-theta}(X_i) + W_i`,
/// so the target vector is not needed.
pub fn empirical_hessian(ds: &Dataset, theta: &CoefVector, loss: &LossSpec) -> Result<DMatrix<f64>> {
    let clip = match loss.clip() {
        Some(c) => c,
        None => return Err(DantzigError::UnsupportedLoss("the clipped empirical Hessian")),
    };
    check_inputs(ds, theta, loss)?;
    let res = ds.residuals(theta);
    let inside: Vec<usize> = (0..ds.n()).filter(|&i| res[i].abs() <= clip).collect();
    Ok(masked_gram(ds.x(), &inside))
}

/// `(1/n) sum_{i in rows} x_i x_i^T` with `n` the full row count.
pub(crate) fn masked_gram(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let sub = x.select_rows(rows);
    sub.tr_mul(&sub) / n
}

/// Largest relative deviation between central finite differences of the
/// empirical risk and [`risk_gradient`]. Deviations are measured relative to
/// `max(1, |grad_j|)`.
///
/// For the Huber loss every residual must stay at least `10 h max(1, L)`
/// away from the kinks so that the difference quotient never straddles one.
pub fn grad_check(ds: &Dataset, theta: &CoefVector, loss: &LossSpec, h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return invalid(format!("finite-difference step must be positive, got {h}"));
    }
    check_inputs(ds, theta, loss)?;
    if let Some(clip) = loss.clip() {
        let margin = 10.0 * h * ds.l_bound().max(1.0);
        if let Some(&r) = ds
            .residuals(theta)
            .iter()
            .find(|r| (r.abs() - clip).abs() <= margin)
        {
            return Err(DantzigError::NearKink { residual: r, clip, margin });
        }
    }
    let analytic = risk_gradient(ds, theta, loss)?.grad;
    let mut worst = 0.0f64;
    let mut probe = theta.as_vector().clone();
    for j in 0..ds.m() {
        let orig = probe[j];
        probe[j] = orig + h;
        let up = empirical_risk(ds, &CoefVector::from(probe.clone()), loss)?;
        probe[j] = orig - h;
        let down = empirical_risk(ds, &CoefVector::from(probe.clone()), loss)?;
        probe[j] = orig;
        let fd = (up - down) / (2.0 * h);
        let dev = (fd - analytic[j]).abs() / analytic[j].abs().max(1.0);
        worst = worst.max(dev);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ds(rows: &[&[f64]], y: &[f64]) -> Dataset {
        let m = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Dataset::with_tight_bound(
            DMatrix::from_row_slice(rows.len(), m, &flat),
            DVector::from_row_slice(y),
        )
        .unwrap()
    }

    fn huber() -> LossSpec {
        LossSpec::huber(1.0, 0.5).unwrap()
    }

    #[test]
    fn psi_examples() {
        assert_eq!(huber_psi(1.2, 2.5), 1.2);
        assert_eq!(huber_psi(3.0, 2.5), 2.5);
        assert_eq!(huber_psi(-4.0, 2.5), -2.5);
        assert_eq!(huber_psi(2.5, 2.5), 2.5);
    }

    #[test]
    fn risk_examples() {
        let d = ds(&[&[1.0]], &[1.0]);
        assert_eq!(empirical_risk(&d, &CoefVector::from_vec(vec![1.0]), &huber()).unwrap(), 0.0);

        // (0.5 * 4 + 0.5 * 0) / 2
        let d = ds(&[&[1.0], &[1.0]], &[2.0, 0.0]);
        let v = empirical_risk(&d, &CoefVector::zeros(1), &LossSpec::Quadratic).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-15);

        let d = ds(&[&[1.0]], &[10.0]);
        let v = empirical_risk(&d, &CoefVector::zeros(1), &huber()).unwrap();
        assert_abs_diff_eq!(v, 21.875, epsilon = 1e-12);
    }

    #[test]
    fn gradient_examples() {
        let d = ds(&[&[1.0], &[1.0]], &[3.0, -3.0]);
        let g = risk_gradient(&d, &CoefVector::zeros(1), &huber()).unwrap();
        assert_eq!(g.grad, vec![0.0]);

        let d = ds(&[&[1.0]], &[1.0]);
        let g = risk_gradient(&d, &CoefVector::zeros(1), &LossSpec::Logistic { k_bound: 1.0 }).unwrap();
        assert_abs_diff_eq!(g.grad[0], -0.5, epsilon = 1e-15);

        // orthonormal columns: theta = X^T y / n is stationary
        let d = ds(
            &[&[1.0, 1.0], &[1.0, -1.0], &[-1.0, 1.0], &[-1.0, -1.0]],
            &[0.3, -1.2, 2.0, 0.7],
        );
        let z = d.x().tr_mul(d.y()) / 4.0;
        let g = risk_gradient(&d, &CoefVector::from(z), &LossSpec::Quadratic).unwrap();
        assert!(g.grad_inf_norm < 1e-15);
    }

    #[test]
    fn logistic_rejects_non_binary_response() {
        let d = ds(&[&[1.0]], &[0.5]);
        assert!(empirical_risk(&d, &CoefVector::zeros(1), &LossSpec::Logistic { k_bound: 1.0 }).is_err());
    }

    #[test]
    fn hessian_examples() {
        let x: &[&[f64]] = &[&[1.0], &[1.0]];
        let both_in = ds(x, &[0.5, -1.0]);
        let h = empirical_hessian(&both_in, &CoefVector::zeros(1), &huber()).unwrap();
        assert_eq!(h[(0, 0)], 1.0);

        let both_out = ds(x, &[5.0, -7.0]);
        let h = empirical_hessian(&both_out, &CoefVector::zeros(1), &huber()).unwrap();
        assert_eq!(h[(0, 0)], 0.0);

        let one_in = ds(x, &[0.5, 9.0]);
        let h = empirical_hessian(&one_in, &CoefVector::zeros(1), &huber()).unwrap();
        assert_eq!(h[(0, 0)], 0.5);

        // closed interval at the clip level
        let at_kink = ds(x, &[2.5, -2.5]);
        let h = empirical_hessian(&at_kink, &CoefVector::zeros(1), &huber()).unwrap();
        assert_eq!(h[(0, 0)], 1.0);

        assert!(empirical_hessian(&one_in, &CoefVector::zeros(1), &LossSpec::Quadratic).is_err());
    }

    #[test]
    fn grad_check_rejects_kink() {
        let d = ds(&[&[1.0, 0.5], &[0.2, 1.0]], &[2.5, 0.3]);
        let err = grad_check(&d, &CoefVector::zeros(2), &huber(), 1e-6).unwrap_err();
        assert!(matches!(err, DantzigError::NearKink { .. }));
    }

    proptest! {
        #[test]
        fn psi_is_odd_monotone_and_bounded(u in -50.0f64..50.0, v in -50.0f64..50.0, c in 0.01f64..10.0) {
            prop_assert_eq!(huber_psi(-u, c), -huber_psi(u, c));
            prop_assert!(huber_psi(u, c).abs() <= c);
            let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
            prop_assert!(huber_psi(lo, c) <= huber_psi(hi, c));
            prop_assert!((huber_psi(u, c) - huber_psi(v, c)).abs() <= (u - v).abs());
        }

        #[test]
        fn huber_matches_quadratic_when_nothing_clips(
            rows in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), 2..10),
            theta in proptest::collection::vec(-1.0f64..1.0, 3),
            seed_y in proptest::collection::vec(-2.0f64..2.0, 10),
        ) {
            let n = rows.len();
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            let x = DMatrix::from_row_slice(n, 3, &flat);
            let y = DVector::from_iterator(n, seed_y.into_iter().take(n));
            let d = Dataset::new(x, y, 1.0).unwrap();
            let t = CoefVector::from_vec(theta);
            // residuals are bounded by 2 + 3 = 5 < clip
            let h = LossSpec::huber(2.0, 1.5).unwrap();
            let a = risk_gradient(&d, &t, &h).unwrap();
            let b = risk_gradient(&d, &t, &LossSpec::Quadratic).unwrap();
            prop_assert!((a.value - b.value).abs() < 1e-12);
            for (ga, gb) in a.grad.iter().zip(&b.grad) {
                prop_assert!((ga - gb).abs() < 1e-12);
            }
            let hess = empirical_hessian(&d, &t, &h).unwrap();
            let gram = d.x().tr_mul(d.x()) / n as f64;
            prop_assert!((hess - gram).amax() < 1e-12);
        }

        #[test]
        fn huber_gradient_bounded_by_clip_times_l(
            rows in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 2), 1..10),
            theta in proptest::collection::vec(-5.0f64..5.0, 2),
            ys in proptest::collection::vec(-100.0f64..100.0, 10),
        ) {
            let n = rows.len();
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            let x = DMatrix::from_row_slice(n, 2, &flat);
            let y = DVector::from_iterator(n, ys.into_iter().take(n));
            let d = Dataset::new(x, y, 3.0).unwrap();
            let h = huber();
            let g = risk_gradient(&d, &CoefVector::from_vec(theta), &h).unwrap();
            prop_assert!(g.grad_inf_norm <= 2.5 * 3.0 + 1e-12);
        }

        #[test]
        fn hessian_is_symmetric_psd(
            rows in proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 3), 1..12),
            ys in proptest::collection::vec(-6.0f64..6.0, 12),
            probe in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let n = rows.len();
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            let x = DMatrix::from_row_slice(n, 3, &flat);
            let y = DVector::from_iterator(n, ys.into_iter().take(n));
            let d = Dataset::new(x, y, 2.0).unwrap();
            let h = empirical_hessian(&d, &CoefVector::zeros(3), &huber()).unwrap();
            prop_assert!((&h - h.transpose()).amax() == 0.0);
            let v = DVector::from_vec(probe);
            prop_assert!(v.dot(&(&h * &v)) >= -1e-12);
        }
    }
}
