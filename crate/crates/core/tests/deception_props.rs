mod common;

use common::{fd_gradient, gaussian, random_problem, rng, scalar_problem};
use lqdeceive::adversary::{simulate_trajectory, Exploration, TrajectorySpec};
use lqdeceive::deception::*;
use lqdeceive::matsolve::*;
use nalgebra::dmatrix;
use proptest::prelude::*;

/// A random gain near zero that keeps the spoofed Riccati equation solvable.
fn in_domain_gain(problem: &DeceptionProblem, seed: u64) -> Matrix {
    let mut g = rng(seed ^ 0x5eed);
    let mut lambda = gaussian(&mut g, problem.plant.m_u(), problem.plant.n()) * 0.1;
    while evaluate(problem, &lambda).is_err() {
        lambda *= 0.5;
    }
    lambda
}

#[test]
fn gradient_matches_finite_differences() {
    for seed in 0..20u64 {
        let n = 2 + (seed % 4) as usize;
        let m_u = 1 + (seed % 2) as usize;
        let m_a = 1 + ((seed / 2) % 2) as usize;
        let mut problem = random_problem(seed, n, m_u, m_a, false, 0.01);
        problem.k_bar = gaussian(&mut rng(seed), m_a, n) * 0.1;
        let lambda = in_domain_gain(&problem, seed);
        let grad = deception_gradient(&problem, &lambda).unwrap();
        let fd = fd_gradient(|l| deception_cost(&problem, l).unwrap(), &lambda, 1e-6);
        let err = (&grad - &fd).norm() / grad.norm().max(1.0);
        assert!(err <= 1e-5, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn scalar_gradient_sign_at_zero() {
    // J̃ decreases as Λ goes negative, so the gradient at zero is positive
    let p = scalar_problem(2.0, 0.0, 1e-6);
    let g = deception_gradient(&p, &p.zero_gain()).unwrap()[(0, 0)];
    assert!(g > 0.0);
    let h = 1e-6;
    let fd = (deception_cost(&p, &dmatrix![h]).unwrap()
        - deception_cost(&p, &dmatrix![-h]).unwrap())
        / (2.0 * h);
    assert!((g - fd).abs() <= 1e-6 * g.abs());
}

#[test]
fn random_adjoint_and_spoofed_residuals() {
    for seed in 0..5u64 {
        let mut problem = random_problem(seed, 3, 2, 1, false, 0.1);
        problem.k_bar = gaussian(&mut rng(seed), 1, 3);
        let lambda = in_domain_gain(&problem, seed);
        let p_u = spoofed_value(&problem, &lambda).unwrap();
        let pi = adjoint_pi(&problem, &lambda, &p_u).unwrap();
        let r = &problem.objective.r;
        let k_u = r.solve(&(problem.plant.b_a.transpose() * &p_u));
        let closed = problem.plant.spoofed(&lambda) + &problem.plant.b_a * &k_u;
        let b_a = &problem.plant.b_a;
        let r_inv = r.inverse();
        let forcing = -problem.k_bar.transpose() * &r_inv * b_a.transpose()
            - b_a * &r_inv * &problem.k_bar
            + &p_u * b_a * &r_inv * &r_inv * b_a.transpose()
            + b_a * &r_inv * &r_inv * b_a.transpose() * &p_u;
        let residual = &closed * &pi + &pi * closed.transpose() + forcing;
        assert!(residual.norm() <= 1e-10 * (1.0 + pi.norm()), "seed {seed}");

        // spoofed value at the deep-stabilizing start
        let l0 = init_gain(&problem.plant, InitMode::DeepStabilize { sigma: 10.0 }).unwrap();
        assert!(spectral_abscissa(&problem.plant.spoofed(&l0)).unwrap() <= -10.0);
        let p0 = spoofed_value(&problem, &l0).unwrap();
        let s = problem.plant.spoofed(&l0);
        let res = s.transpose() * &p0
            + &p0 * &s
            + problem.objective.q.matrix()
            + &p0 * b_a * r.solve(&(b_a.transpose() * &p0));
        assert!(res.norm() <= 1e-9);
    }
}

#[test]
fn nominal_attack_random_certificate() {
    for seed in 0..5u64 {
        let problem = random_problem(seed, 3, 1, 2, false, 1.0);
        let nom = nominal_attack(&problem.plant, &problem.objective).unwrap();
        let closed = &problem.plant.a + &problem.plant.b_a * &nom.k_star;
        assert!(spectral_abscissa(&closed).unwrap() < 0.0);
        let j0 = deception_cost(&problem, &problem.zero_gain()).unwrap();
        assert!((j0 - (&nom.k_star - &problem.k_bar).norm_squared()).abs() < 1e-14);
    }
}

#[test]
fn bsor_descends_to_stationarity() {
    for seed in 0..4u64 {
        let problem = random_problem(seed, 4, 2, 2, false, 1e-3);
        let config = BsorConfig {
            omega: 1e-3,
            tol: 1e-12,
            max_iter: 100_000,
            ..BsorConfig::default()
        };
        let res = bsor_solve(&problem, &config).unwrap();
        assert_eq!(res.status, BsorStatus::Converged);
        let j_zero = deception_cost(&problem, &problem.zero_gain()).unwrap();
        let j_start = res.trace[0].cost;
        assert!(j_start <= j_zero);
        for w in res.trace.windows(2) {
            assert!(
                w[1].cost <= w[0].cost + 1e-12,
                "seed {seed} iterate {}",
                w[1].index
            );
            assert!(w[1].cost <= j_start + 1e-12);
        }
        assert!(res.trace.iter().all(|it| it.closed_loop_abscissa < 0.0));
        assert!(res.uniform_stability_verified);
        assert!(res.trace.last().unwrap().grad_norm <= 1e-6);
        assert!(res.stationarity.riccati <= 1e-6);
        assert!(res.stationarity.adjoint <= 1e-6);
        assert!(res.stationarity.gain <= 1e-6);
        assert!(!res.step_size_bound_exceeded);
    }
}

#[test]
fn certified_runs_verify_lyapunov_bound() {
    for seed in 0..5u64 {
        let mut problem = random_problem(seed, 3, 1, 1, false, 1.0);
        let nom = nominal_attack(&problem.plant, &problem.objective).unwrap();
        problem.k_bar = nom.k_star.clone();
        let rhs = check_existence_condition(&problem).unwrap().rhs;
        let dir = gaussian(&mut rng(seed), 1, 3);
        problem.k_bar = &nom.k_star + dir.normalize() * (0.25 * rhs);
        let cert = check_existence_condition(&problem).unwrap();
        assert!(cert.holds && cert.strengthened_eps.is_some());
        let config = BsorConfig {
            omega: 0.2,
            max_iter: 20_000,
            ..BsorConfig::default()
        };
        let res = bsor_solve(&problem, &config).unwrap();
        assert_eq!(res.status, BsorStatus::Converged);
        assert!(res
            .trace
            .iter()
            .all(|it| it.lyapunov_certificate == Some(true)));
        assert!(res.uniform_stability_verified);
    }
}

#[test]
fn suppression_with_range_condition() {
    let config = BsorConfig {
        omega: 2e-3,
        tol: 1e-12,
        max_iter: 100_000,
        ..BsorConfig::default()
    };
    for seed in 0..3u64 {
        let problem = random_problem(seed, 4, 2, 2, true, 1e-4);
        let nom = nominal_attack(&problem.plant, &problem.objective).unwrap();
        let res = bsor_solve(&problem, &config).unwrap();
        let k_u = spoofed_attack(&problem, &res.lambda_hat).unwrap();
        assert!((&k_u - &res.k_u_hat).norm() < 1e-12);
        assert!(k_u.norm() < 0.5 * nom.k_star.norm());
    }
}

#[test]
fn energy_matches_rk4_quadrature() {
    for seed in 0..5u64 {
        let mut g = rng(500 + seed);
        let a = common::hurwitz(&mut g, 3, 0.5);
        let x0 = [1.0, 0.0, 0.0];
        let energy = closed_loop_energy(&a, &x0).unwrap().value();
        let alpha = spectral_abscissa(&a).unwrap();
        let plant = Plant::new(a, Matrix::zeros(3, 1), Matrix::zeros(3, 1)).unwrap();
        let spec = TrajectorySpec::new(x0.to_vec(), 30.0 / alpha.abs(), Exploration::none(1));
        let tr =
            simulate_trajectory(&plant, &Matrix::zeros(1, 3), &Matrix::zeros(1, 3), &spec).unwrap();
        let f: Vec<f64> = tr.states.iter().map(|x| x.norm_squared()).collect();
        let mut quad = f[0] + f[f.len() - 1];
        for (k, v) in f.iter().enumerate().take(f.len() - 1).skip(1) {
            quad += v * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        let quad = quad * tr.dt / 3.0;
        assert!(
            (energy - quad).abs() <= 1e-4 * energy,
            "seed {seed}: {energy} vs {quad}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matching_target_is_global_minimum(seed in 0u64..1000, scale in 0.01f64..1.0) {
        let mut problem = random_problem(seed, 3, 1, 1, false, 0.5);
        problem.k_bar = nominal_attack(&problem.plant, &problem.objective).unwrap().k_star;
        prop_assert!(deception_cost(&problem, &problem.zero_gain()).unwrap() < 1e-24);
        prop_assert!(deception_gradient(&problem, &problem.zero_gain()).unwrap().norm() < 1e-12);
        let lambda = in_domain_gain(&problem, seed) * scale;
        if let Ok(j) = deception_cost(&problem, &lambda) {
            prop_assert!(j > 0.0);
        }
    }

    #[test]
    fn energy_infinite_when_unstable(shift in 0.0f64..3.0, seed in any::<u64>()) {
        let mut g = rng(seed);
        let a = common::hurwitz(&mut g, 3, 0.5) + Matrix::identity(3, 3) * (0.5 + shift);
        prop_assert_eq!(closed_loop_energy(&a, &[1.0, 1.0, 1.0]).unwrap(), Energy::Infinite);
    }

    #[test]
    fn cost_nonnegative(seed in 0u64..1000) {
        let mut problem = random_problem(seed, 3, 2, 1, false, 0.1);
        problem.k_bar = gaussian(&mut rng(seed), 1, 3);
        let lambda = in_domain_gain(&problem, seed);
        prop_assert!(deception_cost(&problem, &lambda).unwrap() >= 0.0);
    }
}
