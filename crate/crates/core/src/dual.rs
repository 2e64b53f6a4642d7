//! The dual problem: an adversary poisons a defender that learns the
//! minimizing LQR controller.
//!
//! The poisoner injects `a = Lx` while the defender learns
//! `N_a(L) = −M⁻¹B_uᵀZ_a(L)`, where `Z_a` is the stabilizing solution of
//!
//! `(A + B_aL)ᵀZ + Z(A + B_aL) + Q − ZB_uM⁻¹B_uᵀZ = 0`.
//!
//! The poisoner minimizes `‖N_a(L) − N̄‖²_F + tr(LᵀΓL)`. Its gradient is
//! `2(ΓL + B_aᵀZ_aΠ)` where `Π` solves `ĀΠ + ΠĀᵀ + C = 0` with
//! `Ā = A + B_aL − B_uM⁻¹B_uᵀZ_a` and
//! `C = Z_aB_uM⁻²B_uᵀ + B_uM⁻²B_uᵀZ_a + N̄ᵀM⁻¹B_uᵀ + B_uM⁻¹N̄`.

use log::warn;

use crate::deception::bsor::{run, GainObjective};
use crate::deception::{
    BsorConfig, DeceptionError, DeceptionResult, Evaluation, Plant, GAMMA_FLOOR,
};
use crate::matsolve::{
    ensure_finite, numerical_rank, solve_are_min, solve_lyapunov_with, symmetrize, LyapunovForm,
    Matrix, SolveCertificate, SymPosDef, DEFAULT_HURWITZ_MARGIN,
};

/// Relative rank tolerance of [`range_condition`].
pub const RANGE_RANK_TOL: f64 = 1e-9;

/// `B_u` is the learner's channel, `B_a` the poisoner's.
#[derive(Debug, Clone, PartialEq)]
pub struct DualProblem {
    pub plant: Plant,
    pub q: SymPosDef,
    /// Control weight of the learner.
    pub m: SymPosDef,
    /// Target controller gain N̄ (m_u × n).
    pub n_bar: Matrix,
    /// Regularizer on the poisoning gain (m_a × m_a).
    pub gamma: SymPosDef,
}

impl DualProblem {
    pub fn new(
        plant: Plant,
        q: SymPosDef,
        m: SymPosDef,
        n_bar: Matrix,
        gamma: SymPosDef,
    ) -> Result<Self, DeceptionError> {
        let (n, m_u, m_a) = (plant.n(), plant.m_u(), plant.m_a());
        if q.dim() != n || m.dim() != m_u || gamma.dim() != m_a {
            return Err(DeceptionError::DimensionMismatch(format!(
                "Q must be {n}x{n}, M {m_u}x{m_u}, Gamma {m_a}x{m_a}"
            )));
        }
        if n_bar.nrows() != m_u || n_bar.ncols() != n {
            return Err(DeceptionError::DimensionMismatch(format!(
                "N_bar is {}x{}, expected {m_u}x{n}",
                n_bar.nrows(),
                n_bar.ncols()
            )));
        }
        ensure_finite(&n_bar, "N_bar")?;
        if gamma.lambda_min() < GAMMA_FLOOR * (1.0 - 1e-9) {
            return Err(DeceptionError::InvalidConfig(format!(
                "Gamma must dominate {GAMMA_FLOOR:e}·I"
            )));
        }
        Ok(Self {
            plant,
            q,
            m,
            n_bar,
            gamma,
        })
    }

    pub fn zero_gain(&self) -> Matrix {
        Matrix::zeros(self.plant.m_a(), self.plant.n())
    }

    fn check_gain(&self, l: &Matrix) -> Result<(), DeceptionError> {
        if l.nrows() != self.plant.m_a() || l.ncols() != self.plant.n() {
            return Err(DeceptionError::DimensionMismatch(format!(
                "L is {}x{}, expected {}x{}",
                l.nrows(),
                l.ncols(),
                self.plant.m_a(),
                self.plant.n()
            )));
        }
        ensure_finite(l, "L")?;
        Ok(())
    }

    fn poisoned_riccati(&self, l: &Matrix) -> Result<(Matrix, SolveCertificate), DeceptionError> {
        let a = &self.plant.a + &self.plant.b_a * l;
        Ok(solve_are_min(&a, &self.plant.b_u, &self.q, &self.m)?)
    }

    fn controller(&self, z: &Matrix) -> Matrix {
        -self.m.solve(&(self.plant.b_u.transpose() * z))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NominalController {
    /// `N* = −M⁻¹B_uᵀZ`.
    pub n_star: Matrix,
    pub z: Matrix,
    pub certificate: SolveCertificate,
}

/// The controller the defender learns without poisoning.
pub fn nominal_controller(dual: &DualProblem) -> Result<NominalController, DeceptionError> {
    let (z, certificate) = dual.poisoned_riccati(&dual.zero_gain())?;
    Ok(NominalController {
        n_star: dual.controller(&z),
        z,
        certificate,
    })
}

/// `Z_a(L)`.
pub fn poisoned_value(dual: &DualProblem, l: &Matrix) -> Result<Matrix, DeceptionError> {
    dual.check_gain(l)?;
    Ok(dual.poisoned_riccati(l)?.0)
}

/// `N_a(L) = −M⁻¹B_uᵀZ_a(L)`.
pub fn poisoned_controller(dual: &DualProblem, l: &Matrix) -> Result<Matrix, DeceptionError> {
    Ok(dual.controller(&poisoned_value(dual, l)?))
}

/// `Ran(B_a) ⊆ Ran(B_u)`, tested as `rank [B_u B_a] = rank B_u`.
pub fn range_condition(b_a: &Matrix, b_u: &Matrix) -> bool {
    if b_a.nrows() != b_u.nrows() {
        return false;
    }
    let joined = Matrix::from_fn(b_u.nrows(), b_u.ncols() + b_a.ncols(), |i, j| {
        if j < b_u.ncols() {
            b_u[(i, j)]
        } else {
            b_a[(i, j - b_u.ncols())]
        }
    });
    numerical_rank(&joined, RANGE_RANK_TOL) == numerical_rank(b_u, RANGE_RANK_TOL)
}

/// Evaluates `Z_a`, `Π`, `N_a`, cost and gradient at `L`.
pub fn dual_evaluate(dual: &DualProblem, l: &Matrix) -> Result<Evaluation, DeceptionError> {
    dual.check_gain(l)?;
    let plant = &dual.plant;
    let (z, cert) = dual.poisoned_riccati(l)?;
    let n_a = dual.controller(&z);
    let closed = &plant.a + &plant.b_a * l + &plant.b_u * &n_a;
    // G = B_uM⁻¹(N_a − N̄); C = −(G + Gᵀ)
    let g = &plant.b_u * dual.m.solve(&(&n_a - &dual.n_bar));
    let forcing = -symmetrize(&(&g + g.transpose()));
    let pi = solve_lyapunov_with(
        &closed,
        &forcing,
        LyapunovForm::Transposed,
        DEFAULT_HURWITZ_MARGIN,
    )?;
    let cost =
        (&n_a - &dual.n_bar).norm_squared() + (l.transpose() * dual.gamma.matrix() * l).trace();
    let gradient = (dual.gamma.matrix() * l + plant.b_a.transpose() * &z * &pi) * 2.0;
    let adjoint_residual = (&closed * &pi + &pi * closed.transpose() + &forcing).norm();
    Ok(Evaluation {
        gain: l.clone(),
        value: z,
        adjoint: pi,
        response: n_a,
        cost,
        gradient,
        value_residual: cert.residual_norm,
        adjoint_residual,
        closed_loop: closed,
        closed_loop_abscissa: -cert.hurwitz_margin,
    })
}

/// `‖N_a(L) − N̄‖²_F + tr(LᵀΓL)`.
pub fn dual_cost(dual: &DualProblem, l: &Matrix) -> Result<f64, DeceptionError> {
    dual.check_gain(l)?;
    let n_a = poisoned_controller(dual, l)?;
    Ok((n_a - &dual.n_bar).norm_squared() + (l.transpose() * dual.gamma.matrix() * l).trace())
}

pub fn dual_gradient(dual: &DualProblem, l: &Matrix) -> Result<Matrix, DeceptionError> {
    Ok(dual_evaluate(dual, l)?.gradient)
}

impl GainObjective for DualProblem {
    fn gamma(&self) -> &SymPosDef {
        &self.gamma
    }

    fn channel(&self) -> &Matrix {
        &self.plant.b_a
    }

    fn init_system(&self) -> (&Matrix, &Matrix) {
        (&self.plant.a, &self.plant.b_a)
    }

    fn evaluate(&self, gain: &Matrix) -> Result<Evaluation, DeceptionError> {
        dual_evaluate(self, gain)
    }

    fn baseline_cost(&self) -> Option<f64> {
        nominal_controller(self)
            .ok()
            .map(|nom| (nom.n_star - &self.n_bar).norm_squared())
    }

    fn witness(&self) -> Option<(Matrix, f64)> {
        None
    }
}

/// BSOR on the dual problem. The result's `lambda_hat`, `p_u_hat` and
/// `k_u_hat` hold `L̂`, `Z_a(L̂)` and `N_a(L̂)`.
pub fn dual_bsor_solve(
    dual: &DualProblem,
    config: &BsorConfig,
) -> Result<DeceptionResult, DeceptionError> {
    if !range_condition(&dual.plant.b_a, &dual.plant.b_u) {
        warn!("Ran(B_a) is not contained in Ran(B_u); the poisoned Riccati equation may be unsolvable");
    }
    run(dual, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn scalar(a: f64, n_bar: f64, gamma: f64) -> DualProblem {
        DualProblem::new(
            Plant::new(dmatrix![a], dmatrix![1.0], dmatrix![1.0]).unwrap(),
            SymPosDef::scaled_identity(1, 1.0),
            SymPosDef::scaled_identity(1, 1.0),
            dmatrix![n_bar],
            SymPosDef::scaled_identity(1, gamma),
        )
        .unwrap()
    }

    #[test]
    fn nominal_scalar() {
        let nom = nominal_controller(&scalar(-1.0, 0.0, 1.0)).unwrap();
        assert!((nom.n_star[(0, 0)] - (1.0 - 2.0f64.sqrt())).abs() < 1e-12);
        let nom = nominal_controller(&scalar(0.0, 0.0, 1.0)).unwrap();
        assert!((nom.n_star[(0, 0)] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn poisoned_scalar() {
        let d = scalar(-1.0, 0.0, 1.0);
        let z = poisoned_value(&d, &dmatrix![0.5]).unwrap()[(0, 0)];
        let expected = (5.0f64.sqrt() - 1.0) / 2.0;
        assert!((z - expected).abs() < 1e-12);
        let n_a = poisoned_controller(&d, &dmatrix![0.5]).unwrap()[(0, 0)];
        assert!((n_a + expected).abs() < 1e-12);
        let nom = nominal_controller(&d).unwrap();
        assert_eq!(poisoned_controller(&d, &d.zero_gain()).unwrap(), nom.n_star);
    }

    #[test]
    fn range_condition_cases() {
        let b_u = dmatrix![1.0; 0.0];
        assert!(range_condition(&b_u, &b_u));
        assert!(!range_condition(&dmatrix![0.0; 1.0], &b_u));
        assert!(range_condition(&(&b_u * dmatrix![2.0, -3.0]), &b_u));
    }

    #[test]
    fn stationary_start() {
        let n_star = 1.0 - 2.0f64.sqrt();
        let d = scalar(-1.0, n_star, 1.0);
        let res = dual_bsor_solve(&d, &BsorConfig::default()).unwrap();
        assert_eq!(res.trace.len(), 1);
        assert_eq!(res.lambda_hat, dmatrix![0.0]);
    }

    #[test]
    fn suppresses_controller() {
        let d = scalar(-1.0, 0.0, 1e-4);
        let config = BsorConfig {
            omega: 1e-3,
            max_iter: 100_000,
            ..BsorConfig::default()
        };
        let res = dual_bsor_solve(&d, &config).unwrap();
        let n_star = nominal_controller(&d).unwrap().n_star;
        assert!(res.k_u_hat.norm() < n_star.norm());
        assert!(res.trace.windows(2).all(|w| w[1].cost <= w[0].cost + 1e-12));
    }
}
