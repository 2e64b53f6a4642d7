use crate::matsolve::{solve_lyapunov, spectral_abscissa, Matrix, SolveError};

/// State energy `∫₀^∞ ‖x(t)‖² dt` of `ẋ = A_cl x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Energy {
    Finite(f64),
    /// The closed loop is not asymptotically stable.
    Infinite,
}

impl Energy {
    pub fn value(&self) -> f64 {
        match self {
            Energy::Finite(v) => *v,
            Energy::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Energy::Finite(_))
    }
}

/// `x0ᵀWx0` with `A_clᵀW + WA_cl + I = 0`; [`Energy::Infinite`] when `α(A_cl) ≥ 0`.
pub fn closed_loop_energy(a_cl: &Matrix, x0: &[f64]) -> Result<Energy, SolveError> {
    let n = a_cl.nrows();
    if a_cl.ncols() != n || x0.len() != n {
        return Err(SolveError::DimensionMismatch(format!(
            "A_cl is {}x{}, x0 has {} entries",
            a_cl.nrows(),
            a_cl.ncols(),
            x0.len()
        )));
    }
    if spectral_abscissa(a_cl)? >= 0.0 {
        return Ok(Energy::Infinite);
    }
    let w = match solve_lyapunov(a_cl, &Matrix::identity(n, n)) {
        Ok(w) => w,
        // stable but inside the numerical Hurwitz floor: energy is unbounded for all practical purposes
        Err(SolveError::NotHurwitz { .. }) => return Ok(Energy::Infinite),
        Err(e) => return Err(e),
    };
    let x = Matrix::from_column_slice(n, 1, x0);
    Ok(Energy::Finite((x.transpose() * w * x)[(0, 0)]))
}
