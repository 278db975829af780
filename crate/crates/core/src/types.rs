//! Domain types shared by every module: the sample, coefficient vectors,
//! loss specifications and the feasible-set policy.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, DantzigError, Result};

/// A sample `(X_i, Y_i)` with the dictionary already evaluated:
/// `x[(i, j)] = f_j(X_i)`.
#[derive(Clone, Debug)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    l_bound: f64,
    column_scales: Option<Vec<f64>>,
}

impl Dataset {
    /// Validates shapes, finiteness and `|x_ij| <= l_bound`.
    ///
    /// Only `M >= 1` is enforced here; formulas that take `log M` check
    /// `M >= 2` themselves.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, l_bound: f64) -> Result<Self> {
        let (n, m) = x.shape();
        if n == 0 {
            return invalid("dataset needs at least one row");
        }
        if m == 0 {
            return invalid("dataset needs at least one column");
        }
        if y.len() != n {
            return Err(DantzigError::DimensionMismatch {
                what: "response length",
                expected: n,
                got: y.len(),
            });
        }
        if !(l_bound.is_finite() && l_bound > 0.0) {
            return invalid(format!("dictionary bound L must be positive, got {l_bound}"));
        }
        if let Some(v) = x.iter().chain(y.iter()).find(|v| !v.is_finite()) {
            return invalid(format!("non-finite value {v} in data"));
        }
        let max_abs = x.amax();
        if max_abs > l_bound * (1.0 + 1e-12) {
            return invalid(format!(
                "|x_ij| = {max_abs} exceeds the dictionary bound L = {l_bound}"
            ));
        }
        Ok(Self {
            x,
            y,
            l_bound,
            column_scales: None,
        })
    }

    /// Uses the largest absolute design entry as `L`.
    pub fn with_tight_bound(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let l = x.amax();
        if l == 0.0 {
            return invalid("design matrix is identically zero");
        }
        Self::new(x, y, l)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn m(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn l_bound(&self) -> f64 {
        self.l_bound
    }

    pub fn is_normalized(&self) -> bool {
        self.column_scales.is_some()
    }

    /// Empirical norms `||f_j||_n` recorded by [`Dataset::normalize_columns`].
    pub fn column_scales(&self) -> Option<&[f64]> {
        self.column_scales.as_deref()
    }

    /// `||f_j||_n = sqrt(mean_i x_ij^2)` for every column.
    pub fn column_norms(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.x
            .column_iter()
            .map(|c| (c.norm_squared() / n).sqrt())
            .collect()
    }

    /// Rescales every column to unit empirical norm. The returned dataset
    /// records the original norms so that `theta_original = theta / scale`.
    /// `L` becomes the largest absolute entry of the rescaled design.
    pub fn normalize_columns(&self) -> Result<Self> {
        let norms = self.column_norms();
        if let Some(j) = norms.iter().position(|&s| s == 0.0) {
            return invalid(format!("column {j} is identically zero"));
        }
        let mut x = self.x.clone();
        for (j, mut col) in x.column_iter_mut().enumerate() {
            col /= norms[j];
        }
        let l_bound = x.amax();
        // an already-normalized input keeps its scales composed
        let scales = match &self.column_scales {
            Some(prev) => prev.iter().zip(&norms).map(|(a, b)| a * b).collect(),
            None => norms,
        };
        Ok(Self {
            x,
            y: self.y.clone(),
            l_bound,
            column_scales: Some(scales),
        })
    }

    /// Marks a design whose columns are known to have unit empirical norm
    /// (as produced by the simulators) without rescaling it.
    pub fn assume_normalized(mut self) -> Result<Self> {
        let norms = self.column_norms();
        if let Some((j, s)) = norms
            .iter()
            .enumerate()
            .find(|(_, s)| (**s - 1.0).abs() > 1e-8)
        {
            return invalid(format!("column {j} has empirical norm {s}, not 1"));
        }
        self.column_scales = Some(vec![1.0; self.m()]);
        Ok(self)
    }

    pub(crate) fn require_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            invalid("columns must be normalized to unit empirical norm first")
        }
    }

    pub(crate) fn check_theta(&self, theta: &CoefVector) -> Result<()> {
        if theta.len() != self.m() {
            return Err(DantzigError::DimensionMismatch {
                what: "coefficient vector length",
                expected: self.m(),
                got: theta.len(),
            });
        }
        Ok(())
    }

    /// Fitted values `x_i . theta`.
    pub fn predict(&self, theta: &CoefVector) -> DVector<f64> {
        &self.x * theta.as_vector()
    }

    /// `y_i - x_i . theta`.
    pub fn residuals(&self, theta: &CoefVector) -> DVector<f64> {
        &self.y - self.predict(theta)
    }

    /// Maps coefficients of the normalized design back to the original
    /// column units.
    pub fn to_original_coordinates(&self, theta: &CoefVector) -> CoefVector {
        match &self.column_scales {
            Some(scales) => CoefVector::from_fn(theta.len(), |j| theta[j] / scales[j]),
            None => theta.clone(),
        }
    }
}

/// Loss family `gamma(y, u)` evaluated at `u = f_theta(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossSpec {
    /// `0.5 (y - u)^2`.
    Quadratic,
    /// `phi(y - u)`, quadratic up to the clip level `2K + alpha`.
    Huber { k_bound: f64, alpha: f64 },
    /// `-y u + log(1 + e^u)` with `y` in {0, 1}.
    Logistic { k_bound: f64 },
}

impl LossSpec {
    pub fn huber(k_bound: f64, alpha: f64) -> Result<Self> {
        let spec = LossSpec::Huber { k_bound, alpha };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossSpec::Quadratic => Ok(()),
            LossSpec::Huber { k_bound, alpha } => {
                if !(k_bound.is_finite() && k_bound > 0.0) {
                    return invalid(format!("Huber K must be positive, got {k_bound}"));
                }
                if !(alpha.is_finite() && alpha > 0.0) {
                    return invalid(format!("Huber alpha must be positive, got {alpha}"));
                }
                Ok(())
            }
            LossSpec::Logistic { k_bound } => {
                if !(k_bound.is_finite() && k_bound > 0.0) {
                    return invalid(format!("logistic K must be positive, got {k_bound}"));
                }
                Ok(())
            }
        }
    }

    /// Huber clip level `2K + alpha`.
    pub fn clip(&self) -> Option<f64> {
        match *self {
            LossSpec::Huber { k_bound, alpha } => Some(2.0 * k_bound + alpha),
            _ => None,
        }
    }

    pub fn k_bound(&self) -> Option<f64> {
        match *self {
            LossSpec::Quadratic => None,
            LossSpec::Huber { k_bound, .. } | LossSpec::Logistic { k_bound } => Some(k_bound),
        }
    }

    /// `||d gamma / du||_inf`. The quadratic loss has none.
    pub fn lipschitz(&self) -> Result<f64> {
        match *self {
            LossSpec::Quadratic => Err(DantzigError::UnsupportedLoss(
                "a Lipschitz bound (supply r explicitly)",
            )),
            LossSpec::Huber { k_bound, alpha } => Ok(2.0 * k_bound + alpha),
            LossSpec::Logistic { .. } => Ok(1.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Quadratic => "quadratic",
            LossSpec::Huber { .. } => "huber",
            LossSpec::Logistic { .. } => "logistic",
        }
    }
}

/// Dense coefficient vector `theta`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefVector(DVector<f64>);

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub sparsity: usize,
}

impl CoefVector {
    pub fn zeros(m: usize) -> Self {
        Self(DVector::zeros(m))
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        Self(DVector::from_vec(v))
    }

    pub fn from_fn(m: usize, mut f: impl FnMut(usize) -> f64) -> Self {
        Self(DVector::from_fn(m, |j, _| f(j)))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }

    /// Entries in {-1, 0, 1}; zero is detected exactly.
    pub fn sign_vector(&self) -> Vec<i8> {
        self.0
            .iter()
            .map(|&v| {
                if v > 0.0 {
                    1
                } else if v < 0.0 {
                    -1
                } else {
                    0
                }
            })
            .collect()
    }

    /// `J(theta) = { j : theta_j != 0 }`.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn sparsity(&self) -> usize {
        self.0.iter().filter(|v| **v != 0.0).count()
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.lp_norm(1)
    }

    pub fn linf_norm(&self) -> f64 {
        self.0.amax()
    }

    pub fn norms(&self) -> Norms {
        Norms {
            l1: self.l1_norm(),
            l2: self.0.norm(),
            linf: if self.0.is_empty() { 0.0 } else { self.linf_norm() },
            sparsity: self.sparsity(),
        }
    }

    pub fn sub(&self, other: &CoefVector) -> CoefVector {
        CoefVector(&self.0 - &other.0)
    }
}

impl std::ops::Index<usize> for CoefVector {
    type Output = f64;
    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

impl From<DVector<f64>> for CoefVector {
    fn from(v: DVector<f64>) -> Self {
        Self(v)
    }
}

impl From<Vec<f64>> for CoefVector {
    fn from(v: Vec<f64>) -> Self {
        Self::from_vec(v)
    }
}

/// Data-driven stand-in for `Theta = { theta : ||f_theta||_inf <= K }`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum BoxPolicy {
    /// No constraint on `f_theta`.
    #[default]
    None,
    /// `max_i |x_i . theta| <= K` (2n linear rows).
    SampleSup { k_bound: f64 },
    /// `L |theta|_1 <= K`, which implies the sample sup bound.
    L1Surrogate { k_bound: f64 },
}


impl BoxPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BoxPolicy::None => Ok(()),
            BoxPolicy::SampleSup { k_bound } | BoxPolicy::L1Surrogate { k_bound } => {
                if k_bound.is_finite() && k_bound > 0.0 {
                    Ok(())
                } else {
                    invalid(format!("box bound K must be positive, got {k_bound}"))
                }
            }
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            BoxPolicy::None => "no box".to_string(),
            BoxPolicy::SampleSup { k_bound } => format!("sample box max_i |x_i.theta| <= {k_bound}"),
            BoxPolicy::L1Surrogate { k_bound } => format!("l1 box L*|theta|_1 <= {k_bound}"),
        }
    }

    /// Whether `theta` satisfies the policy on `ds`, up to `tol`.
    pub fn contains(&self, ds: &Dataset, theta: &CoefVector, tol: f64) -> bool {
        match *self {
            BoxPolicy::None => true,
            BoxPolicy::SampleSup { k_bound } => ds.predict(theta).amax() <= k_bound + tol,
            BoxPolicy::L1Surrogate { k_bound } => ds.l_bound() * theta.l1_norm() <= k_bound + tol,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sign_vector_examples() {
        assert_eq!(CoefVector::from_vec(vec![-2.0, 0.0, 3.0]).sign_vector(), vec![-1, 0, 1]);
        assert_eq!(CoefVector::from_vec(vec![0.0, 0.0]).sign_vector(), vec![0, 0]);
        assert_eq!(
            CoefVector::from_vec(vec![1e-300, -1e-300]).sign_vector(),
            vec![1, -1]
        );
    }

    #[test]
    fn norms_examples() {
        let n = CoefVector::from_vec(vec![3.0, -4.0]).norms();
        assert_eq!(n, Norms { l1: 7.0, l2: 5.0, linf: 4.0, sparsity: 2 });
        let n = CoefVector::zeros(3).norms();
        assert_eq!(n, Norms { l1: 0.0, l2: 0.0, linf: 0.0, sparsity: 0 });
        let n = CoefVector::from_vec(vec![1.0; 4]).norms();
        assert_eq!(n, Norms { l1: 4.0, l2: 2.0, linf: 1.0, sparsity: 4 });
    }

    #[test]
    fn dataset_rejects_bad_input() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!(Dataset::new(x.clone(), DVector::from_vec(vec![1.0]), 5.0).is_err());
        assert!(Dataset::new(x.clone(), DVector::from_vec(vec![1.0, 2.0]), 3.0).is_err());
        assert!(Dataset::new(x, DVector::from_vec(vec![1.0, f64::NAN]), 5.0).is_err());
    }

    #[test]
    fn normalization_records_scales() {
        let x = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 3.0, -1.0]);
        let ds = Dataset::new(x, DVector::from_vec(vec![1.0, 2.0]), 3.0).unwrap();
        let nd = ds.normalize_columns().unwrap();
        assert!(nd.is_normalized());
        assert_eq!(nd.column_scales().unwrap(), &[3.0, 1.0]);
        for s in nd.column_norms() {
            assert!((s - 1.0).abs() < 1e-15);
        }
        // predictions are preserved under the coordinate map
        let theta_n = CoefVector::from_vec(vec![0.6, -2.0]);
        let theta_o = nd.to_original_coordinates(&theta_n);
        let diff = (ds.predict(&theta_o) - nd.predict(&theta_n)).amax();
        assert!(diff < 1e-14);
    }

    #[test]
    fn huber_constants() {
        let h = LossSpec::huber(1.0, 0.5).unwrap();
        assert_eq!(h.clip(), Some(2.5));
        assert_eq!(h.lipschitz().unwrap(), 2.5);
        assert_eq!(LossSpec::Logistic { k_bound: 1.0 }.lipschitz().unwrap(), 1.0);
        assert!(LossSpec::Quadratic.lipschitz().is_err());
        assert!(LossSpec::huber(1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn sign_vector_is_scale_invariant(
            v in proptest::collection::vec(-10.0f64..10.0, 1..12),
            c in 1e-3f64..1e3,
        ) {
            let t = CoefVector::from_vec(v.clone());
            let scaled = CoefVector::from_vec(v.iter().map(|x| c * x).collect());
            prop_assert_eq!(t.sign_vector(), scaled.sign_vector());
            let nonzero = t.sign_vector().iter().filter(|s| **s != 0).count();
            prop_assert_eq!(t.sparsity(), nonzero);
        }

        #[test]
        fn sample_sup_bounded_by_l1_surrogate(
            rows in proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 3), 1..8),
            theta in proptest::collection::vec(-5.0f64..5.0, 3),
        ) {
            let n = rows.len();
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            let x = DMatrix::from_row_slice(n, 3, &flat);
            let ds = Dataset::new(x, DVector::zeros(n), 2.0).unwrap();
            let t = CoefVector::from_vec(theta);
            prop_assert!(ds.predict(&t).amax() <= ds.l_bound() * t.l1_norm() + 1e-12);
        }
    }
}
