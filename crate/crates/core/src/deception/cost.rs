use crate::matsolve::{
    solve_are_max, solve_lyapunov_with, spectral_abscissa, symmetrize, LyapunovForm, Matrix,
    SolveCertificate, SolveError, DEFAULT_HURWITZ_MARGIN,
};

use super::{weighted_square, AdversaryObjective, DeceptionError, DeceptionProblem, Plant};

/// The attack the adversary would learn without deception.
#[derive(Debug, Clone, PartialEq)]
pub struct NominalAttack {
    /// `K* = R⁻¹B_aᵀP`.
    pub k_star: Matrix,
    pub p: Matrix,
    pub certificate: SolveCertificate,
}

/// `K* = R⁻¹B_aᵀP` with `P` the stabilizing solution of the nominal ARE.
pub fn nominal_attack(
    plant: &Plant,
    objective: &AdversaryObjective,
) -> Result<NominalAttack, DeceptionError> {
    let (p, certificate) =
        solve_are_max(&plant.a, &plant.b_a, &objective.q, &objective.r).map_err(lift_riccati)?;
    let k_star = objective.r.solve(&(plant.b_a.transpose() * &p));
    Ok(NominalAttack {
        k_star,
        p,
        certificate,
    })
}

fn lift_riccati(e: SolveError) -> DeceptionError {
    match e {
        SolveError::NoStabilizingSolution { reason } => {
            DeceptionError::NoStabilizingSolution { reason }
        }
        other => DeceptionError::Solve(other),
    }
}

/// Stabilizing solution of the Riccati equation on the spoofed plant
/// `(A + B_uΛ, B_a)` with weights `(Q, R)`.
pub(crate) fn spoofed_riccati(
    plant: &Plant,
    objective: &AdversaryObjective,
    lambda: &Matrix,
) -> Result<(Matrix, SolveCertificate), DeceptionError> {
    let spoofed = plant.spoofed(lambda);
    let abscissa = spectral_abscissa(&spoofed)?;
    if abscissa >= -DEFAULT_HURWITZ_MARGIN {
        return Err(DeceptionError::SpoofedPlantUnstable { abscissa });
    }
    solve_are_max(&spoofed, &plant.b_a, &objective.q, &objective.r).map_err(lift_riccati)
}

/// `P_u(Λ)`.
pub fn spoofed_value(
    problem: &DeceptionProblem,
    lambda: &Matrix,
) -> Result<Matrix, DeceptionError> {
    problem.check_gain(lambda)?;
    Ok(spoofed_riccati(&problem.plant, &problem.objective, lambda)?.0)
}

/// `K_u(Λ) = R⁻¹B_aᵀP_u(Λ)`: the attack the adversary ends up learning.
pub fn spoofed_attack(
    problem: &DeceptionProblem,
    lambda: &Matrix,
) -> Result<Matrix, DeceptionError> {
    let p_u = spoofed_value(problem, lambda)?;
    Ok(problem
        .objective
        .r
        .solve(&(problem.plant.b_a.transpose() * p_u)))
}

/// `J̃(Λ) = ‖K_u(Λ) − K̄‖²_F + tr(ΛᵀΓΛ)`.
pub fn deception_cost(problem: &DeceptionProblem, lambda: &Matrix) -> Result<f64, DeceptionError> {
    let k_u = spoofed_attack(problem, lambda).map_err(out_of_domain)?;
    Ok((k_u - &problem.k_bar).norm_squared() + weighted_square(lambda, &problem.gamma))
}

fn out_of_domain(e: DeceptionError) -> DeceptionError {
    if e.is_domain_error() {
        DeceptionError::OutOfDomain {
            reason: e.to_string(),
        }
    } else {
        e
    }
}

/// Adjoint matrix Π(Λ): symmetric solution of `ÃΠ + ΠÃᵀ + C = 0` with
/// `Ã = A + B_uΛ + B_aR⁻¹B_aᵀP_u` and
/// `C = −K̄ᵀR⁻¹B_aᵀ − B_aR⁻¹K̄ + P_uB_aR⁻²B_aᵀ + B_aR⁻²B_aᵀP_u`.
pub fn adjoint_pi(
    problem: &DeceptionProblem,
    lambda: &Matrix,
    p_u: &Matrix,
) -> Result<Matrix, DeceptionError> {
    problem.check_gain(lambda)?;
    Ok(adjoint_parts(problem, lambda, p_u)?.0)
}

/// (Π, closed loop Ã, forcing C)
fn adjoint_parts(
    problem: &DeceptionProblem,
    lambda: &Matrix,
    p_u: &Matrix,
) -> Result<(Matrix, Matrix, Matrix), DeceptionError> {
    let plant = &problem.plant;
    let r = &problem.objective.r;
    let k_u = r.solve(&(plant.b_a.transpose() * p_u));
    let closed = plant.spoofed(lambda) + &plant.b_a * &k_u;
    // G = B_aR⁻¹(K_u − K̄); C = G + Gᵀ
    let g = &plant.b_a * r.solve(&(&k_u - &problem.k_bar));
    let forcing = symmetrize(&(&g + g.transpose()));
    let pi = solve_lyapunov_with(
        &closed,
        &forcing,
        LyapunovForm::Transposed,
        DEFAULT_HURWITZ_MARGIN,
    )?;
    Ok((pi, closed, forcing))
}

/// `dJ̃/dΛ = 2(ΓΛ + B_uᵀP_u(Λ)Π(Λ))`.
pub fn deception_gradient(
    problem: &DeceptionProblem,
    lambda: &Matrix,
) -> Result<Matrix, DeceptionError> {
    Ok(evaluate(problem, lambda).map_err(out_of_domain)?.gradient)
}

/// Everything the solver needs at one gain, for either deception problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub gain: Matrix,
    /// Riccati solution at this gain (P_u or Z_a).
    pub value: Matrix,
    /// Adjoint Lyapunov solution Π.
    pub adjoint: Matrix,
    /// Gain the learner converges to (K_u or N_a).
    pub response: Matrix,
    pub cost: f64,
    pub gradient: Matrix,
    pub value_residual: f64,
    pub adjoint_residual: f64,
    /// The learner's closed loop at this gain (Ã for the primary problem).
    pub closed_loop: Matrix,
    /// α of [`Evaluation::closed_loop`].
    pub closed_loop_abscissa: f64,
}

impl Evaluation {
    pub fn grad_norm(&self) -> f64 {
        self.gradient.norm()
    }
}

/// Evaluates `P_u`, `Π`, `K_u`, cost and gradient at `Λ`.
pub fn evaluate(problem: &DeceptionProblem, lambda: &Matrix) -> Result<Evaluation, DeceptionError> {
    problem.check_gain(lambda)?;
    let plant = &problem.plant;
    let (p_u, cert) = spoofed_riccati(plant, &problem.objective, lambda)?;
    let (pi, closed, forcing) = adjoint_parts(problem, lambda, &p_u)?;
    let k_u = problem.objective.r.solve(&(plant.b_a.transpose() * &p_u));
    let cost = (&k_u - &problem.k_bar).norm_squared() + weighted_square(lambda, &problem.gamma);
    let gradient = (problem.gamma.matrix() * lambda + plant.b_u.transpose() * &p_u * &pi) * 2.0;
    let adjoint_residual = (&closed * &pi + &pi * closed.transpose() + &forcing).norm();
    Ok(Evaluation {
        gain: lambda.clone(),
        value: p_u,
        adjoint: pi,
        response: k_u,
        cost,
        gradient,
        value_residual: cert.residual_norm,
        adjoint_residual,
        closed_loop: closed,
        closed_loop_abscissa: -cert.hurwitz_margin,
    })
}
