use crate::matsolve::{solve_lyapunov, Matrix};

use super::{nominal_attack, DeceptionError, DeceptionProblem};

/// Sufficient condition for the deception problem to have a minimizer with a
/// strictly stable deceived loop.
#[derive(Debug, Clone, PartialEq)]
pub struct ExistenceCertificate {
    pub holds: bool,
    /// ‖K* − K̄‖_F
    pub lhs: f64,
    /// √λmin(Γ) / (√λmin(Γ)‖SB_a‖_F + ‖SB_u‖_F)
    pub rhs: f64,
    /// Solution of `(A + B_aK*)ᵀS + S(A + B_aK*) + 2I = 0`.
    pub s: Matrix,
    /// Smallest ε ∈ (0, 1) with `lhs ≤ (ε/2)·rhs`, when one exists.
    pub strengthened_eps: Option<f64>,
}

pub fn check_existence_condition(
    problem: &DeceptionProblem,
) -> Result<ExistenceCertificate, DeceptionError> {
    let plant = &problem.plant;
    let nominal = match nominal_attack(plant, &problem.objective) {
        Ok(nom) => nom,
        Err(DeceptionError::NoStabilizingSolution { .. }) => {
            return Err(DeceptionError::NominalAttackMissing)
        }
        Err(e) => return Err(e),
    };
    let closed = &plant.a + &plant.b_a * &nominal.k_star;
    let n = plant.n();
    let s = solve_lyapunov(&closed, &(Matrix::identity(n, n) * 2.0))?;

    let lhs = (&nominal.k_star - &problem.k_bar).norm();
    let sqrt_gamma = problem.gamma.lambda_min().sqrt();
    let rhs = sqrt_gamma / (sqrt_gamma * (&s * &plant.b_a).norm() + (&s * &plant.b_u).norm());
    let eps = 2.0 * lhs / rhs;
    let strengthened_eps = (eps < 1.0).then(|| eps.max(f64::EPSILON));
    Ok(ExistenceCertificate {
        holds: lhs < rhs,
        lhs,
        rhs,
        s,
        strengthened_eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deception::{AdversaryObjective, Plant};
    use crate::matsolve::SymPosDef;
    use nalgebra::dmatrix;

    fn scalar(r: f64, k_bar: f64) -> DeceptionProblem {
        DeceptionProblem::new(
            Plant::new(dmatrix![-1.0], dmatrix![1.0], dmatrix![1.0]).unwrap(),
            AdversaryObjective::new(
                SymPosDef::scaled_identity(1, 1.0),
                SymPosDef::scaled_identity(1, r),
            ),
            dmatrix![k_bar],
            SymPosDef::scaled_identity(1, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn scalar_closed_form() {
        let cert = check_existence_condition(&scalar(2.0, 0.2)).unwrap();
        let sqrt2 = 2.0f64.sqrt();
        assert!((cert.s[(0, 0)] - sqrt2).abs() < 1e-12);
        assert!((cert.rhs - 1.0 / (2.0 * sqrt2)).abs() < 1e-12);
        let k_star = 1.0 - 0.5f64.sqrt();
        assert!((cert.lhs - (k_star - 0.2)).abs() < 1e-12);
        assert!(cert.holds);
        let eps = cert.strengthened_eps.unwrap();
        assert!((eps - 2.0 * cert.lhs / cert.rhs).abs() < 1e-14);
    }

    #[test]
    fn exact_target_and_far_target() {
        let k_star = 1.0 - 0.5f64.sqrt();
        let cert = check_existence_condition(&scalar(2.0, k_star)).unwrap();
        assert!(cert.lhs < 1e-12 && cert.holds);
        let cert = check_existence_condition(&scalar(2.0, k_star + 10.0)).unwrap();
        assert!(!cert.holds);
        assert!(cert.strengthened_eps.is_none());
    }

    #[test]
    fn missing_nominal_attack() {
        assert_eq!(
            check_existence_condition(&scalar(0.5, 0.2)).unwrap_err(),
            DeceptionError::NominalAttackMissing
        );
    }
}
