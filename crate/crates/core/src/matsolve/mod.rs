//! Dense solvers for Lyapunov equations and algebraic Riccati equations,
//! plus the spectral helpers the rest of the crate builds on.
//!
//! Every symmetric output is explicitly symmetrized before it is returned.

mod lyapunov;
mod riccati;
mod spectral;

pub use lyapunov::{solve_lyapunov, solve_lyapunov_with, LyapunovForm};
pub use riccati::{
    solve_are_max, solve_are_max_with, solve_are_min, solve_are_min_with, RiccatiOptions,
    SolveCertificate,
};
pub use spectral::{
    eigenvalues, is_controllable, is_hurwitz, is_stabilizable, numerical_rank, spectral_abscissa,
    symmetric_eigenvalues,
};

use nalgebra::DMatrix;
use thiserror::Error;

/// Dense real matrix, used for every square and rectangular operand.
pub type Matrix = DMatrix<f64>;

/// Default floor for "strictly stable" checks: `α(X) < -margin`.
pub const DEFAULT_HURWITZ_MARGIN: f64 = 1e-9;

/// Relative symmetry slack accepted on symmetric inputs.
pub const DEFAULT_SYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("matrix is not Hurwitz (spectral abscissa {abscissa:e})")]
    NotHurwitz { abscissa: f64 },
    #[error(
        "state matrix passed to the Riccati solver is not Hurwitz (spectral abscissa {abscissa:e})"
    )]
    NotHurwitzInput { abscissa: f64 },
    #[error("input matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    NonSymmetricInput { asymmetry: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("no stabilizing solution: {reason}")]
    NoStabilizingSolution { reason: String },
    #[error("pair (A, B) is not stabilizable")]
    NotStabilizable,
    #[error("eigenvalue computation failed to converge")]
    EigenFailure,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),
}

/// `(X + Xᵀ) / 2`.
pub fn symmetrize(x: &Matrix) -> Matrix {
    (x + x.transpose()) * 0.5
}

/// Relative asymmetry `‖X − Xᵀ‖_F / ‖X‖_F` (zero for the zero matrix).
pub fn asymmetry(x: &Matrix) -> f64 {
    let norm = x.norm();
    if norm == 0.0 {
        0.0
    } else {
        (x - x.transpose()).norm() / norm
    }
}

pub(crate) fn ensure_finite(x: &Matrix, what: &'static str) -> Result<(), SolveError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SolveError::NonFinite(what))
    }
}

pub(crate) fn ensure_square(x: &Matrix, what: &str) -> Result<usize, SolveError> {
    if x.nrows() != x.ncols() || x.nrows() == 0 {
        return Err(SolveError::DimensionMismatch(format!(
            "{what} must be square and non-empty, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(x.nrows())
}

/// A symmetric positive-definite weight (Q, R, Γ, M and their mismatched
/// counterparts). The stored matrix is exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymPosDef {
    inner: Matrix,
}

impl SymPosDef {
    pub fn new(m: Matrix) -> Result<Self, SolveError> {
        Self::with_tolerance(m, DEFAULT_SYMMETRY_TOL)
    }

    pub fn with_tolerance(m: Matrix, tol: f64) -> Result<Self, SolveError> {
        ensure_square(&m, "weight")?;
        ensure_finite(&m, "weight")?;
        let asym = asymmetry(&m);
        if asym > tol {
            return Err(SolveError::NonSymmetricInput { asymmetry: asym });
        }
        let inner = symmetrize(&m);
        if inner.clone().cholesky().is_none() {
            return Err(SolveError::NotPositiveDefinite);
        }
        Ok(Self { inner })
    }

    /// `s · I_n`; panics if `s` is not strictly positive or `n == 0`.
    pub fn scaled_identity(n: usize, s: f64) -> Self {
        assert!(
            n > 0 && s > 0.0 && s.is_finite(),
            "scaled identity needs n > 0, s > 0"
        );
        Self {
            inner: Matrix::identity(n, n) * s,
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn into_matrix(self) -> Matrix {
        self.inner
    }

    pub fn inverse(&self) -> Matrix {
        let chol = self
            .inner
            .clone()
            .cholesky()
            .expect("validated positive definite");
        symmetrize(&chol.inverse())
    }

    /// Solves `self · X = rhs`.
    pub fn solve(&self, rhs: &Matrix) -> Matrix {
        let chol = self
            .inner
            .clone()
            .cholesky()
            .expect("validated positive definite");
        chol.solve(rhs)
    }

    pub fn lambda_min(&self) -> f64 {
        symmetric_eigenvalues(&self.inner)
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn lambda_max(&self) -> f64 {
        symmetric_eigenvalues(&self.inner)
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scale(&self, s: f64) -> Self {
        assert!(s > 0.0 && s.is_finite());
        Self {
            inner: &self.inner * s,
        }
    }
}
