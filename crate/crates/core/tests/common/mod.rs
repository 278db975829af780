//! Shared generators for the integration suites.
#![allow(dead_code)]

use gdantzig::lp::{LinearProgram, Relation};
use gdantzig::{CoefVector, Dataset};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random LP with 1-4 variables and 1-6 rows. Bounds mix nonnegative,
/// boxed, upper-only and free; rows get one decimal so that ties and
/// degenerate vertices show up.
pub fn random_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let d = rng.random_range(1..=4);
    let k = rng.random_range(1..=6);
    let coef = |rng: &mut ChaCha8Rng| (rng.random_range(-50..=50) as f64) / 10.0;
    let objective = (0..d).map(|_| coef(rng)).collect();
    let mut lp = LinearProgram::new(objective);
    for j in 0..d {
        match rng.random_range(0..4) {
            0 => {}
            1 => {
                let lo = coef(rng);
                let hi = lo + rng.random_range(0..=40) as f64 / 10.0;
                lp.set_bounds(j, lo, hi);
            }
            2 => {
                lp.set_bounds(j, f64::NEG_INFINITY, coef(rng));
            }
            _ => {
                lp.set_free(j);
            }
        }
    }
    for _ in 0..k {
        let row = (0..d).map(|_| coef(rng)).collect();
        let rel = match rng.random_range(0..5) {
            0 | 1 => Relation::Le,
            2 | 3 => Relation::Ge,
            _ => Relation::Eq,
        };
        lp.add_constraint(row, rel, coef(rng) * 2.0);
    }
    lp
}

/// Design with exactly orthonormal columns (`X^T X / n = I`) built from a
/// QR factorization of a Gaussian matrix.
pub fn orthonormal_design(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, m, |_, _| {
        let u: f64 = rng.random::<f64>();
        let v: f64 = rng.random::<f64>();
        (-2.0 * (1.0 - u).ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    });
    let q = g.qr().q();
    q * (n as f64).sqrt()
}

pub fn dataset(x: DMatrix<f64>, y: DVector<f64>) -> Dataset {
    Dataset::with_tight_bound(x, y)
        .unwrap()
        .normalize_columns()
        .unwrap()
}

pub fn soft_threshold(z: f64, r: f64) -> f64 {
    z.signum() * (z.abs() - r).max(0.0)
}

pub fn coef(v: &[f64]) -> CoefVector {
    CoefVector::from_vec(v.to_vec())
}

/// Standard normal entries.
pub fn gaussian_design(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |_, _| rng.sample(rand_distr::StandardNormal))
}

/// Bounded dictionary: uniform entries on `[-sqrt 3, sqrt 3]` (unit variance).
pub fn uniform_design(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
    let a = 3f64.sqrt();
    DMatrix::from_fn(n, m, |_, _| rng.random_range(-a..a))
}
