use gdantzig::diagnostics::{coherence, gram};
use gdantzig::losses::empirical_hessian;
use gdantzig::simulate::{
    generate, long_rows, run_experiment, sweep, Design, Noise, RPolicy, SignSpec, SimConfig, SweepConfig,
    SweepGrid, ThetaStarSpec, ThresholdPolicy,
};
use gdantzig::{BoxPolicy, CoefVector, LossSpec};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn base() -> SimConfig {
    SimConfig {
        n: 300,
        m: 20,
        s: 2,
        design: Design::GaussianNormalized,
        theta_star: ThetaStarSpec { magnitude: 1.0, signs: SignSpec::Random },
        noise: Noise::Laplace { scale: 0.5 },
        loss: LossSpec::huber(1.0, 0.5).unwrap(),
        r_policy: RPolicy::Scaled { multiplier: 1.0 },
        threshold: ThresholdPolicy::default(),
        box_policy: BoxPolicy::None,
        max_coherence: None,
        reps: 40,
        seed: 99,
        eval_sample: 0,
    }
}

#[test]
fn feasibility_is_monotone_in_the_multiplier() {
    let grid = SweepGrid { multiplier: vec![0.5, 1.0, 2.0], ..Default::default() };
    let cells = sweep(&base(), &grid.cells());
    let freqs: Vec<f64> = cells.iter().map(|c| c.outcome.as_ref().unwrap().summary.feasible_freq).collect();
    assert!(freqs.windows(2).all(|w| w[0] <= w[1]), "{freqs:?}");
    assert!(freqs[0] < freqs[2], "{freqs:?}");
}

#[test]
fn exact_signs_imply_exact_support() {
    for noise in [Noise::Gaussian { sigma: 1.0 }, Noise::Cauchy { scale: 0.5 }] {
        let cfg = SimConfig { noise, ..base() };
        let exp = run_experiment(&cfg).unwrap();
        assert!(exp.results.iter().any(|r| r.sign_exact));
        for r in &exp.results {
            assert!(!r.sign_exact || r.support_exact);
        }
    }
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let cfg = base();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run_experiment(&cfg).unwrap());
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| run_experiment(&cfg).unwrap());
    assert_eq!(format!("{:?}", one.summary), format!("{:?}", four.summary));
    let a: Vec<_> = one.results.iter().map(|r| (r.sup_err.to_bits(), r.status.label())).collect();
    let b: Vec<_> = four.results.iter().map(|r| (r.sup_err.to_bits(), r.status.label())).collect();
    assert_eq!(a, b);
}

#[test]
fn sweep_config_from_json() {
    let json = r#"{
        "base": {
            "n": 100, "M": 10, "s": 1,
            "design": {"kind": "orthonormal"},
            "theta_star": {"magnitude": 1.0, "signs": "fixed"},
            "noise": {"kind": "gaussian", "sigma": 0.2},
            "loss": {"kind": "quadratic"},
            "r_policy": {"kind": "fixed", "value": 0.1},
            "reps": 3, "seed": 1, "eval_sample": 0
        },
        "grid": {"n": [100, 400]},
        "cells": [{"seed": 5}]
    }"#;
    let cfg: SweepConfig = serde_json::from_str(json).unwrap();
    let cells = sweep(&cfg.base, &cfg.deltas());
    assert_eq!(cells.len(), 3);
    let rows = long_rows(&cells);
    assert_eq!(rows.len(), 3 * 4);
    assert_eq!(rows.iter().filter(|r| r.rep == "summary").count(), 3);
    assert_eq!(rows[4].n, 400);
}

/// Diagonal of the empirical Huber Hessian near theta* stays above
/// `p_clip / 2`, and its off-diagonal entries stay far below `C3 / s`.
#[test]
fn hessian_diagonal_near_theta_star() {
    let cfg = SimConfig { n: 2000, m: 10, ..base() };
    let (_, p_clip) = cfg.noise_probabilities().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for rep in 0..20 {
        let (ds, star) = generate(&cfg, rep).unwrap();
        let eta = 0.1;
        let dir = CoefVector::from_fn(cfg.m, |_| rng.random_range(-1.0..1.0));
        let theta = CoefVector::from_fn(cfg.m, |j| star[j] + eta * dir[j] / dir.l1_norm());
        let h = empirical_hessian(&ds, &theta, &cfg.loss).unwrap();
        let min_diag = (0..cfg.m).map(|j| h[(j, j)]).fold(f64::INFINITY, f64::min);
        // a diagonal entry averages n bounded terms; 3 standard errors of slack
        let se = ds.l_bound().powi(2) / (cfg.n as f64).sqrt();
        assert!(min_diag >= p_clip / 2.0 - 3.0 * se, "rep {rep}: {min_diag} < {}", p_clip / 2.0);
        assert!(coherence(&h).max_offdiag < 0.5);
    }
}

#[test]
fn rademacher_coherence_screen_holds_every_rep() {
    let cfg = SimConfig {
        design: Design::Rademacher,
        max_coherence: Some(0.15),
        n: 400,
        m: 30,
        ..base()
    };
    for rep in 0..10 {
        let (ds, _) = generate(&cfg, rep).unwrap();
        assert!(coherence(&gram(&ds).unwrap()).max_offdiag <= 0.15);
        assert_eq!(ds.l_bound(), 1.0);
    }
}
