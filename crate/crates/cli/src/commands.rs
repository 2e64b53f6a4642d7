use std::fmt::Write as _;

use log::warn;

use lqdeceive::adversary::{
    datadriven_pi, kleinman_pi_max, DataDrivenOptions, Exploration, InformationPattern,
    KleinmanOptions, LearnerTrace, TrajectorySpec,
};
use lqdeceive::deception::{
    bsor_solve, check_existence_condition, closed_loop_energy, nominal_attack, spoofed_attack,
    BsorConfig, BsorStatus, DeceptionError, DeceptionProblem, DeceptionResult, Plant,
};
use lqdeceive::dual::{dual_bsor_solve, nominal_controller, range_condition, DualProblem};
use lqdeceive::instances::{generate as generate_instance, InstanceSpec};
use lqdeceive::matsolve::{eigenvalues, spectral_abscissa};
use lqdeceive::robustness::{robustness_report, suppression_ratios, MismatchSpec};
use lqdeceive::{Matrix, SymPosDef};

use crate::config::{
    from_matrix, to_matrix, InstanceConfig, NBar, PlantConfig, RunConfig, SolverOverrides,
};
use crate::report::*;
use crate::{to_json, Failure, GenerateArgs, Output};

fn solver_status(result: &DeceptionResult) -> Status {
    match result.status {
        BsorStatus::Converged => Status::Converged,
        BsorStatus::MaxIterations => {
            warn!("solver stopped at the iteration cap before converging");
            Status::MaxIterations
        }
    }
}

/// `iter,cost,grad_norm,step_norm`
pub fn trace_csv(result: &DeceptionResult) -> String {
    let mut out = String::from("iter,cost,grad_norm,step_norm\n");
    for it in &result.trace {
        let _ = writeln!(
            out,
            "{},{:?},{:?},{:?}",
            it.index, it.cost, it.grad_norm, it.step_norm
        );
    }
    out
}

/// Every iterate's gain, row-major.
fn gains_csv(result: &DeceptionResult) -> String {
    let (rows, cols) = result.lambda_hat.shape();
    let mut out = String::from("iter");
    for i in 1..=rows {
        for j in 1..=cols {
            let _ = write!(out, ",g_{i}_{j}");
        }
    }
    out.push('\n');
    for it in &result.trace {
        let _ = write!(out, "{}", it.index);
        for i in 0..rows {
            for j in 0..cols {
                let _ = write!(out, ",{:?}", it.gain[(i, j)]);
            }
        }
        out.push('\n');
    }
    out
}

/// Gain ratio table with `Row i` / `Col. j` labels.
pub fn ratio_csv(rows: &[Vec<Num>]) -> String {
    let cols = rows.first().map_or(0, Vec::len);
    let mut out = String::new();
    for j in 1..=cols {
        let _ = write!(out, ",Col. {j}");
    }
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        let _ = write!(out, "Row {}", i + 1);
        for v in row {
            let _ = write!(out, ",{}", v.csv());
        }
        out.push('\n');
    }
    out
}

fn energy_csv(rows: &[EnergyRow]) -> String {
    let mut out = String::from("system,energy\n");
    for r in rows {
        let _ = writeln!(out, "{},{}", r.system, r.energy.csv());
    }
    out
}

fn sorted_spectrum(a: &Matrix) -> Result<Vec<[f64; 2]>, Failure> {
    let mut eig: Vec<[f64; 2]> = eigenvalues(a)?.iter().map(|z| [z.re, z.im]).collect();
    eig.sort_by(|x, y| x[0].total_cmp(&y[0]).then(x[1].total_cmp(&y[1])));
    Ok(eig)
}

pub fn solve_attack(cfg: &RunConfig) -> Result<Output, Failure> {
    let plant = cfg.plant()?;
    let objective = cfg.objective(&plant)?;
    let nom = nominal_attack(&plant, &objective)?;
    let closed = &plant.a + &plant.b_a * &nom.k_star;
    let existence = if cfg.has_gamma() {
        Some(CertificateReport::from(&check_existence_condition(
            &cfg.problem()?,
        )?))
    } else {
        None
    };
    let mut report = RunReport::new("solve-attack", Status::Ok);
    report.seed = cfg.seed;
    report.solve_attack = Some(SolveAttackReport {
        k_star: from_matrix(&nom.k_star),
        p: from_matrix(&nom.p),
        residual_norm: nom.certificate.residual_norm,
        hurwitz_margin: nom.certificate.hurwitz_margin,
        closed_loop_spectrum: sorted_spectrum(&closed)?,
        existence,
    });
    Ok(Output::report(report))
}

fn energy_of(a_cl: &Matrix, x0: &[f64]) -> Result<Num, Failure> {
    Ok(closed_loop_energy(a_cl, x0)?.into())
}

/// Energies of the loops compared in a deception study.
fn deception_energies(
    problem: &DeceptionProblem,
    lambda: &Matrix,
    x0: &[f64],
) -> Result<Vec<EnergyRow>, Failure> {
    let plant = &problem.plant;
    let k_u = spoofed_attack(problem, lambda)?;
    let optimal = match nominal_attack(plant, &problem.objective) {
        Ok(nom) => energy_of(&(&plant.a + &plant.b_a * &nom.k_star), x0)?,
        // the value of the attack is unbounded: the optimal attack destabilizes
        Err(DeceptionError::NoStabilizingSolution { .. }) => Num::Marker("inf".into()),
        Err(e) => return Err(e.into()),
    };
    let rows = [
        ("no_attack", energy_of(&plant.a, x0)?),
        ("optimal_attack", optimal),
        (
            "deceived_attack",
            energy_of(&(&plant.a + &plant.b_a * &k_u), x0)?,
        ),
        (
            "learning_phase",
            energy_of(&(plant.spoofed(lambda) + &plant.b_a * &k_u), x0)?,
        ),
    ];
    Ok(rows
        .into_iter()
        .map(|(system, energy)| EnergyRow {
            system: system.into(),
            energy,
        })
        .collect())
}

fn design(
    cfg: &RunConfig,
    overrides: &SolverOverrides,
) -> Result<(DeceptionProblem, BsorConfig, DeceptionResult), Failure> {
    let problem = cfg.problem()?;
    let config = cfg.bsor_config(overrides)?;
    let result = bsor_solve(&problem, &config)?;
    Ok((problem, config, result))
}

/// The deception gain from the config, or a freshly designed one.
fn deception_gain(
    cfg: &RunConfig,
    overrides: &SolverOverrides,
    problem: &DeceptionProblem,
) -> Result<(Matrix, &'static str), Failure> {
    match cfg.lambda(&problem.plant)? {
        Some(l) => Ok((l, "config")),
        None => {
            let config = cfg.bsor_config(overrides)?;
            Ok((bsor_solve(problem, &config)?.lambda_hat, "designed"))
        }
    }
}

pub fn design_deception(cfg: &RunConfig, overrides: &SolverOverrides) -> Result<Output, Failure> {
    let (problem, config, result) = design(cfg, overrides)?;
    let plant = &problem.plant;
    let k_star = nominal_attack(plant, &problem.objective)
        .ok()
        .map(|n| n.k_star);
    let (existence, existence_note) = match check_existence_condition(&problem) {
        Ok(c) => (Some(CertificateReport::from(&c)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let ratios = k_star
        .as_ref()
        .map(|k| ratio_rows(&suppression_ratios(&result.k_u_hat, k).expect("same shape")));
    let deceived = plant.spoofed(&result.lambda_hat) + &plant.b_a * &result.k_u_hat;
    let attack_only = &plant.a + &plant.b_a * &result.k_u_hat;
    let energy = deception_energies(&problem, &result.lambda_hat, &cfg.energy_x0(plant.n())?)?;

    let mut files = vec![("trace.csv".to_string(), trace_csv(&result))];
    if cfg.save_iterates() {
        files.push(("gains.csv".into(), gains_csv(&result)));
    }
    if let Some(r) = &ratios {
        files.push(("ratios.csv".into(), ratio_csv(r)));
    }
    files.push(("energy.csv".into(), energy_csv(&energy)));

    let mut report = RunReport::new("design-deception", solver_status(&result));
    report.seed = cfg.seed;
    report.design = Some(DesignReport {
        solver: SolverSummary::new(&result, config.omega),
        lambda_hat: from_matrix(&result.lambda_hat),
        p_u_hat: from_matrix(&result.p_u_hat),
        pi_hat: from_matrix(&result.pi_hat),
        k_u_hat: from_matrix(&result.k_u_hat),
        k_star: k_star.as_ref().map(from_matrix),
        ratios,
        existence,
        existence_note,
        deceived_abscissa: spectral_abscissa(&deceived)?,
        attack_only_abscissa: spectral_abscissa(&attack_only)?,
        energy,
    });
    Ok(Output {
        report,
        files,
        primary: None,
    })
}

fn learner_outcome(
    name: &str,
    result: Result<LearnerTrace, lqdeceive::adversary::LearnerError>,
) -> (LearnerOutcome, Option<String>) {
    match result {
        Ok(trace) => {
            let csv = trace.to_csv();
            (
                LearnerOutcome {
                    name: name.into(),
                    status: if trace.converged {
                        "Converged"
                    } else {
                        "NotConverged"
                    }
                    .into(),
                    error: None,
                    final_gain: Some(from_matrix(trace.final_gain())),
                    final_distance: Some(trace.final_distance()),
                    iterations: trace.iterations.len() - 1,
                },
                Some(csv),
            )
        }
        Err(e) => {
            warn!("{name} learner failed: {e}");
            (
                LearnerOutcome {
                    name: name.into(),
                    status: "Failed".into(),
                    error: Some(e.to_string()),
                    final_gain: None,
                    final_distance: None,
                    iterations: 0,
                },
                None,
            )
        }
    }
}

pub fn simulate_learner(
    cfg: &RunConfig,
    overrides: &SolverOverrides,
    seed: Option<u64>,
) -> Result<Output, Failure> {
    let seed = seed.or(cfg.seed).unwrap_or(0);
    let plant = cfg.plant()?;
    let objective = cfg.objective(&plant)?;
    let (problem, lambda, source) = match cfg.lambda(&plant)? {
        Some(l) => {
            // the regularizer plays no part in the learned gain
            let gamma = SymPosDef::scaled_identity(plant.m_u(), 1.0);
            let k_bar = Matrix::zeros(plant.m_a(), plant.n());
            (
                DeceptionProblem::new(plant, objective, k_bar, gamma)?,
                l,
                "config",
            )
        }
        None => {
            let problem = cfg.problem()?;
            let (l, source) = deception_gain(cfg, overrides, &problem)?;
            (problem, l, source)
        }
    };
    let predicted = spoofed_attack(&problem, &lambda)?;
    let plant = &problem.plant;
    let sim = cfg.simulation();
    let k0 = cfg.k0(plant)?;
    let exploration =
        Exploration::seeded(plant.n(), plant.m_a(), sim.amplitude.unwrap_or(1.0), seed);
    let mut spec = TrajectorySpec::new(
        sim.x0.clone().unwrap_or_else(|| vec![1.0; plant.n()]),
        sim.horizon.unwrap_or(10.0),
        exploration,
    );
    if let Some(dt) = sim.dt {
        spec.dt = dt;
    }

    let mut outcomes = Vec::new();
    let mut files = Vec::new();
    let model = kleinman_pi_max(
        plant,
        &lambda,
        &problem.objective,
        &k0,
        &KleinmanOptions::default(),
    );
    let mut runs = vec![("model_based", model)];
    for (name, pattern) in [
        ("unknown_dynamics", InformationPattern::UnknownDynamics),
        ("known_input_matrix", InformationPattern::KnownInputMatrix),
    ] {
        let mut opts = DataDrivenOptions {
            pattern,
            ..DataDrivenOptions::default()
        };
        if let Some(h) = sim.interval_steps {
            opts.interval_steps = h;
        }
        runs.push((
            name,
            datadriven_pi(plant, &lambda, &problem.objective, &spec, &k0, &opts),
        ));
    }
    for (name, result) in runs {
        if let Err(e) = &result {
            let f = Failure::from(e.clone());
            if f.status == crate::report::Status::InputError {
                return Err(f);
            }
        }
        let (outcome, csv) = learner_outcome(name, result);
        if let Some(csv) = csv {
            files.push((format!("learner_{name}.csv"), csv));
        }
        outcomes.push(outcome);
    }
    let status = if outcomes.iter().any(|o| o.status == "Failed") {
        Status::LearnerFailed
    } else {
        Status::Ok
    };
    let mut report = RunReport::new("simulate-learner", status);
    report.seed = Some(seed);
    if status == Status::LearnerFailed {
        report.error = Some("at least one learner failed; see learner.learners".into());
    }
    report.learner = Some(LearnerReport {
        lambda: from_matrix(&lambda),
        lambda_source: source.into(),
        predicted_gain: from_matrix(&predicted),
        learners: outcomes,
    });
    Ok(Output {
        report,
        files,
        primary: None,
    })
}

pub fn dual(cfg: &RunConfig, overrides: &SolverOverrides) -> Result<Output, Failure> {
    let plant = cfg.plant()?;
    let w = cfg.dual_weights(&plant)?;
    let zero_target = Matrix::zeros(plant.m_u(), plant.n());
    let probe = DualProblem::new(
        plant.clone(),
        w.q.clone(),
        w.m.clone(),
        zero_target,
        w.gamma.clone(),
    )?;
    let nominal = nominal_controller(&probe)?;
    let n_bar = match w.n_bar {
        NBar::Given(m) => m,
        NBar::Scaled(s) => &nominal.n_star * s,
    };
    let problem = DualProblem::new(plant, w.q, w.m, n_bar, w.gamma)?;
    let config = cfg.bsor_config(overrides)?;
    let result = dual_bsor_solve(&problem, &config)?;

    let mut files = vec![("trace.csv".to_string(), trace_csv(&result))];
    if cfg.save_iterates() {
        files.push(("gains.csv".into(), gains_csv(&result)));
    }
    let mut report = RunReport::new("dual", solver_status(&result));
    report.seed = cfg.seed;
    report.dual = Some(DualReport {
        solver: SolverSummary::new(&result, config.omega),
        range_condition: range_condition(&problem.plant.b_a, &problem.plant.b_u),
        n_star: from_matrix(&nominal.n_star),
        z: from_matrix(&nominal.z),
        n_bar: from_matrix(&problem.n_bar),
        l_hat: from_matrix(&result.lambda_hat),
        z_a_hat: from_matrix(&result.p_u_hat),
        n_a_hat: from_matrix(&result.k_u_hat),
    });
    Ok(Output {
        report,
        files,
        primary: None,
    })
}

pub fn robustness(cfg: &RunConfig, overrides: &SolverOverrides) -> Result<Output, Failure> {
    let problem = cfg.problem()?;
    let (q_hat, r_hat) = cfg.mismatch(&problem.plant)?;
    let mismatch = MismatchSpec::new(&problem, q_hat, r_hat)?;
    let (lambda, source) = deception_gain(cfg, overrides, &problem)?;
    let r = robustness_report(&problem, &mismatch, &lambda)?;
    let ratios = r.ratios.as_ref().map(ratio_rows);
    let mismatched_ratios = r.mismatched_ratios.as_ref().map(ratio_rows);
    let mut files = Vec::new();
    if let Some(t) = &ratios {
        files.push(("ratios.csv".to_string(), ratio_csv(t)));
    }
    if let Some(t) = &mismatched_ratios {
        files.push(("ratios_mismatched.csv".to_string(), ratio_csv(t)));
    }
    let mut report = RunReport::new("robustness", Status::Ok);
    report.seed = cfg.seed;
    report.robustness = Some(RobustnessSection {
        lambda: from_matrix(&lambda),
        lambda_source: source.into(),
        j_tilde: r.j_tilde,
        j_hat: r.j_hat,
        gap: r.gap,
        bound_status: format!("{:?}", r.bound_status),
        weights_ordered: r.weights_ordered,
        k_u: from_matrix(&r.k_u),
        k_hat_u: from_matrix(&r.k_hat_u),
        ratios,
        mismatched_ratios,
    });
    Ok(Output {
        report,
        files,
        primary: None,
    })
}

pub fn energy(cfg: &RunConfig, overrides: &SolverOverrides) -> Result<Output, Failure> {
    let (x0, rows) = match cfg.energy.as_ref().and_then(|e| e.systems.as_ref()) {
        Some(systems) => {
            if systems.is_empty() {
                return Err(Failure::input("energy.systems is empty"));
            }
            let mut x0_used = None;
            let mut rows = Vec::with_capacity(systems.len());
            for s in systems {
                let a = to_matrix(&s.a_cl, &format!("energy.systems[{}].a_cl", s.name))?;
                if !a.is_square() {
                    return Err(Failure::input(format!("{}: A_cl must be square", s.name)));
                }
                let x0 = cfg.energy_x0(a.nrows())?;
                rows.push(EnergyRow {
                    system: s.name.clone(),
                    energy: energy_of(&a, &x0)?,
                });
                x0_used.get_or_insert(x0);
            }
            (x0_used.expect("at least one system"), rows)
        }
        None => {
            let problem = cfg.problem()?;
            let (lambda, _) = deception_gain(cfg, overrides, &problem)?;
            let x0 = cfg.energy_x0(problem.plant.n())?;
            let rows = deception_energies(&problem, &lambda, &x0)?;
            (x0, rows)
        }
    };
    let files = vec![("energy.csv".to_string(), energy_csv(&rows))];
    let mut report = RunReport::new("energy", Status::Ok);
    report.seed = cfg.seed;
    report.energy = Some(EnergyReport { x0, rows });
    Ok(Output {
        report,
        files,
        primary: None,
    })
}

/// The emitted instance is itself a config: add an objective and gamma to
/// run the other subcommands on it.
pub fn instance_config(plant: &Plant, spec: &InstanceConfig, seed: u64) -> RunConfig {
    RunConfig {
        schema_version: crate::config::SCHEMA_VERSION,
        seed: Some(seed),
        out: None,
        instance: Some(spec.clone()),
        plant: Some(PlantConfig {
            a: from_matrix(&plant.a),
            b_u: from_matrix(&plant.b_u),
            b_a: from_matrix(&plant.b_a),
        }),
        objective: None,
        k_bar: None,
        gamma: None,
        lambda: None,
        solver: None,
        mismatch: None,
        simulation: None,
        dual: None,
        energy: None,
    }
}

pub fn generate(
    cfg: Option<&RunConfig>,
    args: &GenerateArgs,
    seed: Option<u64>,
) -> Result<Output, Failure> {
    let base = cfg.and_then(|c| c.instance.clone());
    let pick = |flag: Option<usize>, from_cfg: Option<usize>, name: &str| {
        flag.or(from_cfg)
            .ok_or_else(|| Failure::input(format!("generate needs --{name} or instance.{name}")))
    };
    let inst = InstanceConfig {
        n: pick(args.n, base.as_ref().map(|b| b.n), "n")?,
        m_u: pick(args.m_u, base.as_ref().map(|b| b.m_u), "m-u")?,
        m_a: pick(args.m_a, base.as_ref().map(|b| b.m_a), "m-a")?,
        range_mode: args.range_mode || base.as_ref().is_some_and(|b| b.range_mode),
        margin: base.as_ref().and_then(|b| b.margin),
    };
    let seed = seed.or(cfg.and_then(|c| c.seed)).unwrap_or(0);
    let mut spec = InstanceSpec::new(inst.n, inst.m_u, inst.m_a).range_mode(inst.range_mode);
    if let Some(m) = inst.margin {
        spec.margin = m;
    }
    let plant = generate_instance(&spec, seed)?;
    let instance = instance_config(&plant, &inst, seed);
    let mut report = RunReport::new("generate", Status::Ok);
    report.seed = Some(seed);
    report.generate = Some(GenerateReport {
        n: inst.n,
        m_u: inst.m_u,
        m_a: inst.m_a,
        range_mode: inst.range_mode,
        abscissa: spectral_abscissa(&plant.a)?,
        range_condition: range_condition(&plant.b_a, &plant.b_u),
    });
    Ok(Output {
        report,
        files: vec![("instance.json".into(), to_json(&instance))],
        primary: Some("instance.json".into()),
    })
}
