//! Block successive over-relaxation for the deception stationarity system.
//!
//! Each sweep solves the spoofed Riccati equation at the current gain, then the
//! adjoint Lyapunov equation, forms the block Gauss-Seidel gain
//! `Λ_GS = −Γ⁻¹B_uᵀP_uΠ` and relaxes `Λ⁺ = Λ + ω(Λ_GS − Λ)`. The update is the
//! scaled gradient step `Λ − (ω/2)Γ⁻¹∇J̃(Λ)`.

use log::{debug, info, warn};

use crate::matsolve::{is_controllable, solve_are_min, symmetric_eigenvalues, Matrix, SymPosDef};

use super::{
    check_existence_condition, evaluate, nominal_attack, DeceptionError, DeceptionProblem,
    Evaluation, Plant,
};

/// How the starting gain Λ⁰ is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub enum InitMode {
    #[default]
    Zero,
    /// Λ⁰ places the spectrum of `A + BΛ⁰` left of `−sigma`.
    DeepStabilize { sigma: f64 },
}

/// Starting gain for the primary problem (channel `B_u`).
pub fn init_gain(plant: &Plant, mode: InitMode) -> Result<Matrix, DeceptionError> {
    init_for(&plant.a, &plant.b_u, mode)
}

/// `DeepStabilize` solves the LQR Riccati equation on `(A + σI, B)` with unit
/// weights and returns `−BᵀZ`, so that `α(A + BΛ⁰) < −σ`.
pub(crate) fn init_for(a: &Matrix, b: &Matrix, mode: InitMode) -> Result<Matrix, DeceptionError> {
    let (n, m) = (a.nrows(), b.ncols());
    match mode {
        InitMode::Zero => Ok(Matrix::zeros(m, n)),
        InitMode::DeepStabilize { sigma } => {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(DeceptionError::InvalidConfig(format!(
                    "deep-stabilize shift must be positive, got {sigma}"
                )));
            }
            if !is_controllable(a, b)? {
                return Err(DeceptionError::NotControllable);
            }
            let shifted = a + Matrix::identity(n, n) * sigma;
            let (z, _) = solve_are_min(
                &shifted,
                b,
                &SymPosDef::scaled_identity(n, 1.0),
                &SymPosDef::scaled_identity(m, 1.0),
            )?;
            Ok(-(b.transpose() * z))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BsorConfig {
    /// Relaxation factor ω ∈ (0, 2).
    pub omega: f64,
    /// Stop once `‖Λⁱ − Λⁱ⁻¹‖_F < tol·ω`.
    pub tol: f64,
    pub max_iter: usize,
    pub init: InitMode,
    /// Lipschitz constant of the gradient, if the caller has an estimate.
    pub lipschitz_hint: Option<f64>,
    /// Keep P_u and Π on every k-th iterate (plus the first and last).
    pub retain_every: usize,
    /// Stop once `‖∇J̃‖_F` falls to this floor.
    pub gradient_floor: f64,
    /// Step halvings allowed when an update leaves the domain.
    pub max_step_halvings: usize,
}

impl Default for BsorConfig {
    fn default() -> Self {
        Self {
            omega: 1.0,
            tol: 1e-8,
            max_iter: 10_000,
            init: InitMode::Zero,
            lipschitz_hint: None,
            retain_every: 50,
            gradient_floor: 1e-10,
            max_step_halvings: 20,
        }
    }
}

impl BsorConfig {
    pub fn validate(&self) -> Result<(), DeceptionError> {
        let bad = |msg: String| Err(DeceptionError::InvalidConfig(msg));
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return bad(format!("omega must lie in (0, 2), got {}", self.omega));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if let InitMode::DeepStabilize { sigma } = self.init {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return bad(format!(
                    "deep-stabilize shift must be positive, got {sigma}"
                ));
            }
        }
        if let Some(l) = self.lipschitz_hint {
            if !(l > 0.0 && l.is_finite()) {
                return bad(format!("lipschitz_hint must be positive, got {l}"));
            }
        }
        if self.retain_every == 0 {
            return bad("retain_every must be at least 1".into());
        }
        if self.gradient_floor.is_nan() || self.gradient_floor < 0.0 {
            return bad("gradient_floor must be non-negative".into());
        }
        Ok(())
    }

    /// `(2/L)·λmin(Γ⁻¹)/λmax(Γ⁻¹)²`, when a Lipschitz hint is set.
    pub fn omega_bound(&self, gamma: &SymPosDef) -> Option<f64> {
        self.lipschitz_hint
            .map(|l| 2.0 / l * gamma.lambda_min().powi(2) / gamma.lambda_max())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsorStatus {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeceptionIterate {
    pub index: usize,
    pub gain: Matrix,
    /// Retained on the first, last and every `retain_every`-th iterate.
    pub p_u: Option<Matrix>,
    pub pi: Option<Matrix>,
    pub cost: f64,
    pub grad_norm: f64,
    /// `‖Λⁱ − Λⁱ⁻¹‖_F` (zero on the first iterate).
    pub step_norm: f64,
    /// Relaxation factor that produced this iterate.
    pub omega: f64,
    pub are_residual: f64,
    pub adjoint_residual: f64,
    pub closed_loop_abscissa: f64,
    /// Whether `ÃᵀS + SÃ ⪯ −2(1−ε)I` holds, when the strengthened existence
    /// condition supplies `S` and `ε`.
    pub lyapunov_certificate: Option<bool>,
}

/// Residual norms of the three stationarity equations at the returned gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityResiduals {
    pub riccati: f64,
    pub adjoint: f64,
    /// `‖Λ + Γ⁻¹BᵀPΠ‖_F`
    pub gain: f64,
}

/// Output of a BSOR run. For the dual problem the gain is `L`, the value
/// matrix `Z_a` and the response `N_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeceptionResult {
    pub lambda_hat: Matrix,
    pub p_u_hat: Matrix,
    pub pi_hat: Matrix,
    pub k_u_hat: Matrix,
    pub cost: f64,
    pub trace: Vec<DeceptionIterate>,
    pub status: BsorStatus,
    pub stationarity: StationarityResiduals,
    pub omega_final: f64,
    /// Set when the solver had to halve ω after consecutive cost increases.
    pub step_size_bound_exceeded: bool,
    pub omega_bound: Option<f64>,
    /// Updates rolled back because they left the domain.
    pub domain_retries: usize,
    /// Every iterate had a Hurwitz closed loop, and passed the Lyapunov
    /// certificate when one was available.
    pub uniform_stability_verified: bool,
}

/// What the solver needs from a problem whose gain is tuned by BSOR.
pub(crate) trait GainObjective {
    fn gamma(&self) -> &SymPosDef;
    /// Input matrix in the Gauss-Seidel update.
    fn channel(&self) -> &Matrix;
    /// `(A, B)` used to build the starting gain.
    fn init_system(&self) -> (&Matrix, &Matrix);
    fn evaluate(&self, gain: &Matrix) -> Result<Evaluation, DeceptionError>;
    /// Cost at the zero gain, when that gain is in the domain.
    fn baseline_cost(&self) -> Option<f64>;
    /// `(S, ε)` for the per-iterate Lyapunov certificate.
    fn witness(&self) -> Option<(Matrix, f64)>;
}

impl GainObjective for DeceptionProblem {
    fn gamma(&self) -> &SymPosDef {
        &self.gamma
    }

    fn channel(&self) -> &Matrix {
        &self.plant.b_u
    }

    fn init_system(&self) -> (&Matrix, &Matrix) {
        (&self.plant.a, &self.plant.b_u)
    }

    fn evaluate(&self, gain: &Matrix) -> Result<Evaluation, DeceptionError> {
        evaluate(self, gain)
    }

    fn baseline_cost(&self) -> Option<f64> {
        nominal_attack(&self.plant, &self.objective)
            .ok()
            .map(|nom| (nom.k_star - &self.k_bar).norm_squared())
    }

    fn witness(&self) -> Option<(Matrix, f64)> {
        let cert = check_existence_condition(self).ok()?;
        cert.strengthened_eps.map(|eps| (cert.s, eps))
    }
}

/// Runs the relaxed block fixed-point iteration on the primary problem.
pub fn bsor_solve(
    problem: &DeceptionProblem,
    config: &BsorConfig,
) -> Result<DeceptionResult, DeceptionError> {
    run(problem, config)
}

fn gauss_seidel_gain<O: GainObjective>(obj: &O, eval: &Evaluation) -> Matrix {
    -obj.gamma()
        .solve(&(obj.channel().transpose() * &eval.value * &eval.adjoint))
}

fn lyapunov_check(eval: &Evaluation, witness: &Option<(Matrix, f64)>) -> Option<bool> {
    witness.as_ref().map(|(s, eps)| {
        let form = eval.closed_loop.transpose() * s + s * &eval.closed_loop;
        let top = symmetric_eigenvalues(&form)
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        top <= -2.0 * (1.0 - eps) + 1e-9 * (1.0 + form.norm())
    })
}

fn record(
    index: usize,
    eval: &Evaluation,
    step_norm: f64,
    omega: f64,
    keep: bool,
    witness: &Option<(Matrix, f64)>,
) -> DeceptionIterate {
    DeceptionIterate {
        index,
        gain: eval.gain.clone(),
        p_u: keep.then(|| eval.value.clone()),
        pi: keep.then(|| eval.adjoint.clone()),
        cost: eval.cost,
        grad_norm: eval.grad_norm(),
        step_norm,
        omega,
        are_residual: eval.value_residual,
        adjoint_residual: eval.adjoint_residual,
        closed_loop_abscissa: eval.closed_loop_abscissa,
        lyapunov_certificate: lyapunov_check(eval, witness),
    }
}

pub(crate) fn run<O: GainObjective>(
    obj: &O,
    config: &BsorConfig,
) -> Result<DeceptionResult, DeceptionError> {
    config.validate()?;
    let (a, b) = obj.init_system();
    let start = init_for(a, b, config.init)?;
    let mut eval = match obj.evaluate(&start) {
        Ok(e) => e,
        Err(e) if e.is_domain_error() => {
            return Err(match config.init {
                InitMode::DeepStabilize { sigma } => DeceptionError::ShiftTooSmall { sigma },
                InitMode::Zero => DeceptionError::InfeasibleStart {
                    reason: format!("zero gain is outside the domain: {e}"),
                },
            })
        }
        Err(e) => return Err(e),
    };
    if let Some(baseline) = obj.baseline_cost() {
        if eval.cost > baseline + 1e-12 * (1.0 + baseline) {
            return Err(DeceptionError::InfeasibleStart {
                reason: format!(
                    "starting cost {:e} exceeds the cost {:e} of the zero gain",
                    eval.cost, baseline
                ),
            });
        }
    }

    let omega_bound = config.omega_bound(obj.gamma());
    if let Some(bound) = omega_bound {
        if config.omega > bound {
            warn!(
                "omega {} exceeds the step-size bound {bound:e}",
                config.omega
            );
        }
    }
    let witness = obj.witness();
    let mut omega = config.omega;
    let mut trace = vec![record(0, &eval, 0.0, omega, true, &witness)];
    let mut status = BsorStatus::MaxIterations;
    let mut bound_exceeded = false;
    let mut domain_retries = 0;
    let mut increases = 0;

    if eval.grad_norm() <= config.gradient_floor {
        status = BsorStatus::Converged;
    } else {
        for i in 1..=config.max_iter {
            let target = gauss_seidel_gain(obj, &eval);
            let mut halvings = 0;
            let (next, step_omega) = loop {
                let candidate = &eval.gain + (&target - &eval.gain) * omega;
                match obj.evaluate(&candidate) {
                    Ok(e) => break (e, omega),
                    Err(e) if e.is_domain_error() => {
                        if halvings == config.max_step_halvings {
                            return Err(DeceptionError::DomainExit {
                                iteration: i,
                                gain: candidate,
                                reason: e.to_string(),
                            });
                        }
                        halvings += 1;
                        domain_retries += 1;
                        omega *= 0.5;
                        debug!("iterate {i} left the domain ({e}); omega halved to {omega:e}");
                    }
                    Err(e) => return Err(e),
                }
            };
            let step = (&next.gain - &eval.gain).norm();
            if next.cost > eval.cost + 1e-12 {
                increases += 1;
                if increases == 2 {
                    omega *= 0.5;
                    increases = 0;
                    bound_exceeded = true;
                    warn!("cost rose twice in a row at iterate {i}; omega halved to {omega:e}");
                }
            } else {
                increases = 0;
            }
            let keep = i % config.retain_every == 0;
            trace.push(record(i, &next, step, step_omega, keep, &witness));
            eval = next;
            if step < config.tol * step_omega || eval.grad_norm() <= config.gradient_floor {
                status = BsorStatus::Converged;
                break;
            }
        }
    }

    if let Some(last) = trace.last_mut() {
        last.p_u = Some(eval.value.clone());
        last.pi = Some(eval.adjoint.clone());
    }
    let stationarity = StationarityResiduals {
        riccati: eval.value_residual,
        adjoint: eval.adjoint_residual,
        gain: (&eval.gain - gauss_seidel_gain(obj, &eval)).norm(),
    };
    let uniform_stability_verified = trace
        .iter()
        .all(|it| it.closed_loop_abscissa < 0.0 && it.lyapunov_certificate != Some(false));
    info!(
        "bsor finished: {:?} after {} iterates, cost {:e}, gradient {:e}",
        status,
        trace.len() - 1,
        eval.cost,
        eval.grad_norm()
    );
    Ok(DeceptionResult {
        lambda_hat: eval.gain,
        p_u_hat: eval.value,
        pi_hat: eval.adjoint,
        k_u_hat: eval.response,
        cost: eval.cost,
        trace,
        status,
        stationarity,
        omega_final: omega,
        step_size_bound_exceeded: bound_exceeded,
        omega_bound,
        domain_retries,
        uniform_stability_verified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deception::{deception_gradient, AdversaryObjective};
    use crate::matsolve::spectral_abscissa;
    use nalgebra::dmatrix;

    fn example(r: f64, k_bar: f64, gamma: f64) -> DeceptionProblem {
        DeceptionProblem::new(
            Plant::new(dmatrix![-1.0], dmatrix![1.0], dmatrix![1.0]).unwrap(),
            AdversaryObjective::new(
                SymPosDef::scaled_identity(1, 1.0),
                SymPosDef::scaled_identity(1, r),
            ),
            dmatrix![k_bar],
            SymPosDef::scaled_identity(1, gamma),
        )
        .unwrap()
    }

    #[test]
    fn deep_stabilize_scalar() {
        let p = example(2.0, 0.0, 1.0);
        let l0 = init_gain(&p.plant, InitMode::DeepStabilize { sigma: 100.0 }).unwrap();
        let expected = -(99.0 + (99.0f64 * 99.0 + 1.0).sqrt());
        assert!((l0[(0, 0)] - expected).abs() < 1e-9);
        assert!((l0[(0, 0)] + 198.005).abs() < 1e-3);
        assert_eq!(init_gain(&p.plant, InitMode::Zero).unwrap(), dmatrix![0.0]);
    }

    #[test]
    fn deep_stabilize_needs_controllability() {
        let plant = Plant::new(
            dmatrix![-1.0, 0.0; 0.0, -2.0],
            dmatrix![1.0; 0.0],
            dmatrix![1.0; 1.0],
        )
        .unwrap();
        assert_eq!(
            init_gain(&plant, InitMode::DeepStabilize { sigma: 10.0 }).unwrap_err(),
            DeceptionError::NotControllable
        );
        let plant = Plant::new(
            dmatrix![-1.0, 1.0; 0.0, -2.0],
            dmatrix![0.0; 1.0],
            dmatrix![1.0; 1.0],
        )
        .unwrap();
        let l0 = init_gain(&plant, InitMode::DeepStabilize { sigma: 10.0 }).unwrap();
        assert!(spectral_abscissa(&plant.spoofed(&l0)).unwrap() <= -10.0);
    }

    #[test]
    fn config_validation() {
        let ok = BsorConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            BsorConfig {
                omega: 0.0,
                ..ok.clone()
            },
            BsorConfig {
                omega: 2.0,
                ..ok.clone()
            },
            BsorConfig {
                tol: 0.0,
                ..ok.clone()
            },
            BsorConfig {
                init: InitMode::DeepStabilize { sigma: -1.0 },
                ..ok.clone()
            },
            BsorConfig {
                lipschitz_hint: Some(0.0),
                ..ok.clone()
            },
        ] {
            assert!(matches!(
                bad.validate(),
                Err(DeceptionError::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn stationary_start_converges_immediately() {
        let k_star = 1.0 - 0.5f64.sqrt();
        let p = example(2.0, k_star, 1.0);
        let res = bsor_solve(&p, &BsorConfig::default()).unwrap();
        assert_eq!(res.status, BsorStatus::Converged);
        assert_eq!(res.trace.len(), 1);
        assert_eq!(res.lambda_hat, dmatrix![0.0]);
        assert!(res.trace[0].grad_norm < 1e-14);
    }

    #[test]
    fn example_deception_reaches_target() {
        let p = example(0.5, 0.2, 1e-6);
        let config = BsorConfig {
            omega: 1e-3,
            tol: 1e-10,
            max_iter: 200_000,
            init: InitMode::DeepStabilize { sigma: 100.0 },
            ..BsorConfig::default()
        };
        let res = bsor_solve(&p, &config).unwrap();
        let lam = res.lambda_hat[(0, 0)];
        assert!((lam + 4.1).abs() < 5e-2, "Λ̂ = {lam}");
        assert!((res.p_u_hat[(0, 0)] - 0.1).abs() < 1e-3);
        let ku = res.k_u_hat[(0, 0)];
        assert!((-1.0 + lam + ku + 4.9).abs() < 5e-2);
        assert!((-1.0 + ku + 0.8).abs() < 1e-2);
    }

    #[test]
    fn update_is_scaled_gradient_step() {
        let p = example(2.0, 0.0, 0.5);
        let config = BsorConfig {
            omega: 0.3,
            max_iter: 25,
            ..BsorConfig::default()
        };
        let res = bsor_solve(&p, &config).unwrap();
        for w in res.trace.windows(2) {
            let grad = deception_gradient(&p, &w[0].gain).unwrap();
            let predicted = &w[0].gain - p.gamma.solve(&grad) * (w[1].omega / 2.0);
            assert!((&w[1].gain - predicted).norm() <= 1e-10);
            assert!(w[1].cost <= w[0].cost + 1e-12);
        }
    }

    #[test]
    fn retention_keeps_first_last_and_stride() {
        let p = example(2.0, 0.0, 0.5);
        let config = BsorConfig {
            omega: 0.05,
            max_iter: 23,
            retain_every: 10,
            tol: 1e-30,
            gradient_floor: 0.0,
            ..BsorConfig::default()
        };
        let res = bsor_solve(&p, &config).unwrap();
        assert_eq!(res.status, BsorStatus::MaxIterations);
        let kept: Vec<usize> = res
            .trace
            .iter()
            .filter(|it| it.p_u.is_some())
            .map(|it| it.index)
            .collect();
        assert_eq!(kept, vec![0, 10, 20, 23]);
        assert!(res
            .trace
            .iter()
            .all(|it| it.p_u.is_some() == it.pi.is_some()));
    }

    #[test]
    fn infeasible_zero_start() {
        let p = example(0.5, 0.2, 1e-6);
        assert!(matches!(
            bsor_solve(&p, &BsorConfig::default()),
            Err(DeceptionError::InfeasibleStart { .. })
        ));
    }

    #[test]
    fn start_above_baseline_is_rejected() {
        let k_star = 1.0 - 0.5f64.sqrt();
        let p = example(2.0, k_star, 1.0);
        let config = BsorConfig {
            init: InitMode::DeepStabilize { sigma: 5.0 },
            ..BsorConfig::default()
        };
        assert!(matches!(
            bsor_solve(&p, &config),
            Err(DeceptionError::InfeasibleStart { .. })
        ));
    }
}
