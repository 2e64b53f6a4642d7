mod common;

use common::{fd_gradient, gaussian, rng};
use lqdeceive::deception::{BsorConfig, BsorStatus, Plant};
use lqdeceive::dual::*;
use lqdeceive::instances::{generate, InstanceSpec};
use lqdeceive::matsolve::{spectral_abscissa, Matrix, SymPosDef};
use nalgebra::dmatrix;

fn range_dual(seed: u64, n: usize, gamma: f64) -> DualProblem {
    let plant = generate(&InstanceSpec::new(n, 2, 2).range_mode(true), seed).unwrap();
    DualProblem::new(
        plant,
        SymPosDef::scaled_identity(n, 1.0),
        SymPosDef::scaled_identity(2, 1.0),
        Matrix::zeros(2, n),
        SymPosDef::scaled_identity(2, gamma),
    )
    .unwrap()
}

#[test]
fn nominal_closed_loop_hurwitz() {
    for seed in 0..5 {
        let d = range_dual(seed, 3, 1.0);
        let nom = nominal_controller(&d).unwrap();
        let closed = &d.plant.a + &d.plant.b_u * &nom.n_star;
        assert!(spectral_abscissa(&closed).unwrap() < 0.0);
    }
}

#[test]
fn feasible_for_every_poisoning_gain() {
    for seed in 0..20u64 {
        let n = 2 + (seed % 3) as usize;
        let d = range_dual(seed, n, 1.0);
        assert!(range_condition(&d.plant.b_a, &d.plant.b_u));
        let mut g = rng(seed);
        for _ in 0..20 {
            let l = gaussian(&mut g, 2, n) * 3.0;
            let n_a = poisoned_controller(&d, &l).unwrap();
            let closed = &d.plant.a + &d.plant.b_a * &l + &d.plant.b_u * &n_a;
            assert!(spectral_abscissa(&closed).unwrap() < 0.0);
        }
    }
}

#[test]
fn range_violation_can_be_infeasible() {
    // the poisoner drives an uncontrollable, unstable mode
    let plant = Plant::new(
        dmatrix![-1.0, 0.0; 0.0, -1.0],
        dmatrix![1.0; 0.0],
        dmatrix![0.0; 1.0],
    )
    .unwrap();
    let d = DualProblem::new(
        plant,
        SymPosDef::scaled_identity(2, 1.0),
        SymPosDef::scaled_identity(1, 1.0),
        Matrix::zeros(1, 2),
        SymPosDef::scaled_identity(1, 1.0),
    )
    .unwrap();
    assert!(!range_condition(&d.plant.b_a, &d.plant.b_u));
    assert!(poisoned_controller(&d, &dmatrix![0.0, 2.0]).is_err());
}

#[test]
fn gradient_matches_finite_differences() {
    for seed in 0..5u64 {
        let base = range_dual(seed, 3, 0.05);
        let n_star = nominal_controller(&base).unwrap().n_star;
        let d = DualProblem {
            n_bar: n_star * 0.5,
            ..base
        };
        let l = gaussian(&mut rng(seed + 40), 2, 3) * 0.3;
        let grad = dual_gradient(&d, &l).unwrap();
        let fd = fd_gradient(|x| dual_cost(&d, x).unwrap(), &l, 1e-6);
        let err = (&grad - &fd).norm() / grad.norm().max(1.0);
        assert!(err <= 1e-5, "seed {seed}: {err:e}");
    }
}

#[test]
fn scalar_descent() {
    let d = DualProblem::new(
        Plant::new(dmatrix![-1.0], dmatrix![1.0], dmatrix![1.0]).unwrap(),
        SymPosDef::scaled_identity(1, 1.0),
        SymPosDef::scaled_identity(1, 1.0),
        dmatrix![0.0],
        SymPosDef::scaled_identity(1, 1e-4),
    )
    .unwrap();
    let config = BsorConfig {
        omega: 1e-3,
        max_iter: 100_000,
        ..BsorConfig::default()
    };
    let res = dual_bsor_solve(&d, &config).unwrap();
    assert_eq!(res.status, BsorStatus::Converged);
    let n_star = nominal_controller(&d).unwrap().n_star;
    assert!(res.k_u_hat.norm() < n_star.norm());
    assert!(res.trace.windows(2).all(|w| w[1].cost <= w[0].cost + 1e-12));
}

#[test]
fn random_descent_to_stationarity() {
    let config = BsorConfig {
        omega: 1e-2,
        tol: 1e-12,
        max_iter: 50_000,
        ..BsorConfig::default()
    };
    for seed in 0..5u64 {
        let base = range_dual(seed, 4, 1e-2);
        let n_star = nominal_controller(&base).unwrap().n_star;
        let d = DualProblem {
            n_bar: n_star * 0.5,
            ..base
        };
        let res = dual_bsor_solve(&d, &config).unwrap();
        assert!(res.trace.windows(2).all(|w| w[1].cost <= w[0].cost + 1e-12));
        assert!(res.trace.last().unwrap().grad_norm <= 1e-6);
        assert!(res.stationarity.gain <= 1e-6);
        assert_eq!(res.domain_retries, 0);
    }
}
