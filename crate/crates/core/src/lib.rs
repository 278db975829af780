//! Generalized Dantzig selector for sparse regression with Lipschitz losses.
//!
//! The estimator minimizes `|theta|_1` subject to `|grad R_n(theta)|_inf <= r`,
//! where `R_n` is the empirical risk of a quadratic, Huber or logistic loss.
//! Modules:
//!
//! * [`types`]: datasets, coefficient vectors, loss and box specifications.
//! * [`losses`]: risk, gradient and empirical Hessian.
//! * [`lp`]: dense two-phase simplex and a vertex-enumeration oracle.
//! * [`dantzig`]: quadratic and Huber Dantzig fits, the Lasso helper, a grid
//!   oracle and thresholding.
//! * [`diagnostics`]: coherence and restricted-eigenvalue checks, tuning and
//!   the chain of theoretical constants.
//! * [`simulate`]: data generation and Monte Carlo experiments.

pub mod dantzig;
pub mod diagnostics;
pub mod error;
pub mod losses;
pub mod lp;
pub mod simulate;
pub mod types;

pub use error::{DantzigError, Result};
pub use types::{BoxPolicy, CoefVector, Dataset, LossSpec, Norms};
