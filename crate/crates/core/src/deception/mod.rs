//! Deception design against a maximizing linear-quadratic adversary.
//!
//! The defender feeds `u = Λx` into the loop while the adversary gathers data.
//! The adversary then learns `K_u(Λ) = R⁻¹B_aᵀP_u(Λ)`, where `P_u(Λ)` is the
//! stabilizing solution of the spoofed Riccati equation on `A + B_uΛ`. This
//! module evaluates that map, its deception cost and gradient, and searches for
//! the best `Λ` with the relaxed block fixed-point iteration in [`bsor`].

pub mod bsor;
mod certificate;
mod cost;
mod energy;

pub use bsor::{
    bsor_solve, init_gain, BsorConfig, BsorStatus, DeceptionIterate, DeceptionResult, InitMode,
    StationarityResiduals,
};
pub use certificate::{check_existence_condition, ExistenceCertificate};
pub use cost::{
    adjoint_pi, deception_cost, deception_gradient, evaluate, nominal_attack, spoofed_attack,
    spoofed_value, Evaluation, NominalAttack,
};
pub use energy::{closed_loop_energy, Energy};

use thiserror::Error;

use crate::matsolve::{
    ensure_finite, spectral_abscissa, Matrix, SolveError, SymPosDef, DEFAULT_HURWITZ_MARGIN,
};

/// Smallest admissible eigenvalue of the regularizer Γ.
pub const GAMMA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeceptionError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("no stabilizing solution: {reason}")]
    NoStabilizingSolution { reason: String },
    #[error("spoofed plant A + B_uΛ is not Hurwitz (abscissa {abscissa:e})")]
    SpoofedPlantUnstable { abscissa: f64 },
    #[error("gain outside the domain of the deception cost: {reason}")]
    OutOfDomain { reason: String },
    #[error("nominal attack does not exist; the existence condition is inapplicable")]
    NominalAttackMissing,
    #[error("pair (A, B) is not controllable")]
    NotControllable,
    #[error("deep-stabilizing initial gain with shift {sigma} still leaves the spoofed Riccati equation unsolvable")]
    ShiftTooSmall { sigma: f64 },
    #[error("infeasible start: {reason}")]
    InfeasibleStart { reason: String },
    #[error("iterate {iteration} left the domain after repeated step halving: {reason}")]
    DomainExit {
        iteration: usize,
        gain: Matrix,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

impl DeceptionError {
    /// Errors meaning "this gain is not in the domain", as opposed to bad input.
    pub fn is_domain_error(&self) -> bool {
        matches!(
            self,
            DeceptionError::NoStabilizingSolution { .. }
                | DeceptionError::SpoofedPlantUnstable { .. }
                | DeceptionError::OutOfDomain { .. }
                | DeceptionError::Solve(SolveError::NotHurwitz { .. })
                | DeceptionError::Solve(SolveError::NotStabilizable)
                | DeceptionError::Solve(SolveError::EigenFailure)
        )
    }
}

/// Closed-loop plant `ẋ = Ax + B_u u + B_a a`.
///
/// `A` already contains the nominal feedback `A_o + B_u F`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub a: Matrix,
    pub b_u: Matrix,
    pub b_a: Matrix,
}

impl Plant {
    pub fn new(a: Matrix, b_u: Matrix, b_a: Matrix) -> Result<Self, DeceptionError> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(DeceptionError::DimensionMismatch(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b_u.nrows() != n || b_a.nrows() != n || b_u.ncols() == 0 || b_a.ncols() == 0 {
            return Err(DeceptionError::DimensionMismatch(format!(
                "B_u is {}x{}, B_a is {}x{}, expected {n} rows each",
                b_u.nrows(),
                b_u.ncols(),
                b_a.nrows(),
                b_a.ncols()
            )));
        }
        ensure_finite(&a, "A")?;
        ensure_finite(&b_u, "B_u")?;
        ensure_finite(&b_a, "B_a")?;
        Ok(Self { a, b_u, b_a })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m_u(&self) -> usize {
        self.b_u.ncols()
    }

    pub fn m_a(&self) -> usize {
        self.b_a.ncols()
    }

    /// `A + B_uΛ`.
    pub fn spoofed(&self, lambda: &Matrix) -> Matrix {
        &self.a + &self.b_u * lambda
    }
}

/// The adversary's weights in `∫ xᵀQx − aᵀRa`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryObjective {
    pub q: SymPosDef,
    pub r: SymPosDef,
}

impl AdversaryObjective {
    pub fn new(q: SymPosDef, r: SymPosDef) -> Self {
        Self { q, r }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeceptionProblem {
    pub plant: Plant,
    pub objective: AdversaryObjective,
    /// Target gain K̄ the defender wants the adversary to learn (m_a × n).
    pub k_bar: Matrix,
    /// Regularizer Γ on the deception gain (m_u × m_u).
    pub gamma: SymPosDef,
}

impl DeceptionProblem {
    /// Validates dimensions, `α(A) < 0` and `Γ ⪰ GAMMA_FLOOR·I`.
    pub fn new(
        plant: Plant,
        objective: AdversaryObjective,
        k_bar: Matrix,
        gamma: SymPosDef,
    ) -> Result<Self, DeceptionError> {
        let (n, m_u, m_a) = (plant.n(), plant.m_u(), plant.m_a());
        if objective.q.dim() != n || objective.r.dim() != m_a {
            return Err(DeceptionError::DimensionMismatch(format!(
                "Q must be {n}x{n} and R {m_a}x{m_a}"
            )));
        }
        if k_bar.nrows() != m_a || k_bar.ncols() != n {
            return Err(DeceptionError::DimensionMismatch(format!(
                "K_bar is {}x{}, expected {m_a}x{n}",
                k_bar.nrows(),
                k_bar.ncols()
            )));
        }
        if gamma.dim() != m_u {
            return Err(DeceptionError::DimensionMismatch(format!(
                "Gamma must be {m_u}x{m_u}"
            )));
        }
        ensure_finite(&k_bar, "K_bar")?;
        if gamma.lambda_min() < GAMMA_FLOOR * (1.0 - 1e-9) {
            return Err(DeceptionError::InvalidConfig(format!(
                "Gamma must dominate {GAMMA_FLOOR:e}·I"
            )));
        }
        let abscissa = spectral_abscissa(&plant.a)?;
        if abscissa >= -DEFAULT_HURWITZ_MARGIN {
            return Err(DeceptionError::Solve(SolveError::NotHurwitzInput {
                abscissa,
            }));
        }
        Ok(Self {
            plant,
            objective,
            k_bar,
            gamma,
        })
    }

    /// A zero deception gain of the right shape.
    pub fn zero_gain(&self) -> Matrix {
        Matrix::zeros(self.plant.m_u(), self.plant.n())
    }

    pub(crate) fn check_gain(&self, lambda: &Matrix) -> Result<(), DeceptionError> {
        if lambda.nrows() != self.plant.m_u() || lambda.ncols() != self.plant.n() {
            return Err(DeceptionError::DimensionMismatch(format!(
                "Lambda is {}x{}, expected {}x{}",
                lambda.nrows(),
                lambda.ncols(),
                self.plant.m_u(),
                self.plant.n()
            )));
        }
        ensure_finite(lambda, "Lambda")?;
        Ok(())
    }
}

/// `tr(XᵀΓX)`.
pub(crate) fn weighted_square(x: &Matrix, gamma: &SymPosDef) -> f64 {
    (x.transpose() * gamma.matrix() * x).trace()
}
