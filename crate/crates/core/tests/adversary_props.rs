mod common;

use common::{random_problem, scalar_problem};
use lqdeceive::adversary::*;
use lqdeceive::deception::{bsor_solve, spoofed_attack, BsorConfig, Plant};
use lqdeceive::matsolve::Matrix;
use nalgebra::dmatrix;
use proptest::prelude::*;

fn final_state(plant: &Plant, spec: &TrajectorySpec) -> nalgebra::DVector<f64> {
    let zero_l = Matrix::zeros(plant.m_u(), plant.n());
    let zero_k = Matrix::zeros(plant.m_a(), plant.n());
    simulate_trajectory(plant, &zero_l, &zero_k, spec)
        .unwrap()
        .states
        .last()
        .unwrap()
        .clone()
}

#[test]
fn rk4_fourth_order_scalar() {
    let plant = Plant::new(dmatrix![-1.0], dmatrix![1.0], dmatrix![1.0]).unwrap();
    let err = |dt: f64| {
        let spec = TrajectorySpec {
            dt,
            ..TrajectorySpec::new(vec![1.0], 2.0, Exploration::none(1))
        };
        (final_state(&plant, &spec)[0] - (-2.0f64).exp()).abs()
    };
    let ratio = err(0.1) / err(0.05);
    assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
}

#[test]
fn rk4_richardson_order() {
    let mut g = common::rng(3);
    let a = common::hurwitz(&mut g, 3, 0.3);
    let plant = Plant::new(a, Matrix::zeros(3, 1), Matrix::zeros(3, 1)).unwrap();
    let run = |dt: f64| {
        let spec = TrajectorySpec {
            dt,
            ..TrajectorySpec::new(vec![1.0, -0.5, 0.3], 1.6, Exploration::none(1))
        };
        final_state(&plant, &spec)
    };
    let (x1, x2, x4) = (run(0.04), run(0.02), run(0.01));
    let ratio = (&x1 - &x2).norm() / (&x2 - &x4).norm();
    assert!((ratio - 16.0).abs() < 2.0, "ratio {ratio}");
}

#[test]
fn learners_agree_on_scalar_grid() {
    for (r, lambda) in [(0.5, -4.1), (0.5, -2.0), (2.0, 0.0), (2.0, -1.0)] {
        let p = scalar_problem(r, 0.0, 1.0);
        let lambda = dmatrix![lambda];
        let k_u = spoofed_attack(&p, &lambda).unwrap();
        let model = kleinman_pi_max(
            &p.plant,
            &lambda,
            &p.objective,
            &dmatrix![0.0],
            &KleinmanOptions::default(),
        )
        .unwrap();
        assert!((model.final_gain() - &k_u).norm() < 1e-8);
        let spec = TrajectorySpec::new(vec![1.0], 5.0, Exploration::seeded(1, 1, 1.0, 9));
        let data = datadriven_pi(
            &p.plant,
            &lambda,
            &p.objective,
            &spec,
            &dmatrix![0.0],
            &DataDrivenOptions::default(),
        )
        .unwrap();
        assert!((data.final_gain() - &k_u).norm() < 1e-4);
    }
}

#[test]
fn learners_agree_on_random_instances() {
    for seed in 0..3u64 {
        let problem = random_problem(seed, 3, 2, 1, false, 1e-3);
        let config = BsorConfig {
            omega: 1e-3,
            max_iter: 50_000,
            ..BsorConfig::default()
        };
        let lambda = bsor_solve(&problem, &config).unwrap().lambda_hat;
        let k_u = spoofed_attack(&problem, &lambda).unwrap();
        let k0 = Matrix::zeros(1, 3);
        let model = kleinman_pi_max(
            &problem.plant,
            &lambda,
            &problem.objective,
            &k0,
            &KleinmanOptions::default(),
        )
        .unwrap();
        let spec = TrajectorySpec::new(
            vec![1.0, 1.0, 1.0],
            10.0,
            Exploration::seeded(3, 1, 1.0, seed),
        );
        for pattern in [
            InformationPattern::UnknownDynamics,
            InformationPattern::KnownInputMatrix,
        ] {
            let opts = DataDrivenOptions {
                pattern,
                ..DataDrivenOptions::default()
            };
            let data = datadriven_pi(
                &problem.plant,
                &lambda,
                &problem.objective,
                &spec,
                &k0,
                &opts,
            )
            .unwrap();
            let tol = 1e-2 * (1.0 + k_u.norm());
            assert!(
                (data.final_gain() - &k_u).norm() <= tol,
                "seed {seed} {pattern:?}"
            );
            assert!((data.final_gain() - model.final_gain()).norm() <= 5e-2);
        }
        assert!(model.final_distance() <= 1e-8);
    }
}

#[test]
fn csv_has_one_row_per_iterate() {
    let p = scalar_problem(2.0, 0.0, 1.0);
    let tr = kleinman_pi_max(
        &p.plant,
        &dmatrix![0.0],
        &p.objective,
        &dmatrix![0.0],
        &KleinmanOptions::default(),
    )
    .unwrap();
    let csv = tr.to_csv();
    assert!(csv.starts_with("iteration,distance\n"));
    assert_eq!(csv.lines().count(), tr.iterations.len() + 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scalar_values_increase(r in 1.2f64..10.0, lambda in -3.0f64..0.0) {
        let p = scalar_problem(r, 0.0, 1.0);
        let tr = kleinman_pi_max(&p.plant, &dmatrix![lambda], &p.objective, &dmatrix![0.0], &KleinmanOptions::default())
            .unwrap();
        for w in tr.values.windows(2) {
            prop_assert!(w[1][(0, 0)] >= w[0][(0, 0)] - 1e-14);
        }
        prop_assert!(tr.iterations.iter().all(|s| s.distance >= 0.0));
    }
}
