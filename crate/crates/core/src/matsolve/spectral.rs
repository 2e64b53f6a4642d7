use nalgebra::linalg::Schur;
use nalgebra::{Complex, DMatrix, DVector};

use super::{ensure_square, Matrix, SolveError};

/// Eigenvalues of a square real matrix.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<Complex<f64>>, SolveError> {
    let n = ensure_square(a, "eigenvalue input")?;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::EigenFailure);
    }
    let schur =
        Schur::try_new(a.clone(), f64::EPSILON, 10_000 * n).ok_or(SolveError::EigenFailure)?;
    Ok(schur.complex_eigenvalues().iter().cloned().collect())
}

/// α(A): the largest real part over the spectrum of `A`.
pub fn spectral_abscissa(a: &Matrix) -> Result<f64, SolveError> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `α(A) < −margin`. Eigen-solver failure counts as "not Hurwitz".
pub fn is_hurwitz(a: &Matrix, margin: f64) -> bool {
    spectral_abscissa(a).map(|s| s < -margin).unwrap_or(false)
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &Matrix) -> Vec<f64> {
    let mut ev: Vec<f64> = a.clone().symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Number of singular values above `tol · max(1, σ_max)`.
pub fn numerical_rank(m: &Matrix, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let floor = tol * smax.max(1.0);
    sv.iter().filter(|&&s| s > floor).count()
}

const PBH_TOL: f64 = 1e-9;

/// Hautus test on every eigenvalue with `Re λ ≥ 0`.
pub fn is_stabilizable(a: &Matrix, b: &Matrix) -> Result<bool, SolveError> {
    pbh(a, b, |z| z.re >= -PBH_TOL)
}

/// Hautus test on every eigenvalue.
pub fn is_controllable(a: &Matrix, b: &Matrix) -> Result<bool, SolveError> {
    pbh(a, b, |_| true)
}

fn pbh(a: &Matrix, b: &Matrix, select: impl Fn(&Complex<f64>) -> bool) -> Result<bool, SolveError> {
    let n = ensure_square(a, "state matrix")?;
    if b.nrows() != n {
        return Err(SolveError::DimensionMismatch(format!(
            "input matrix has {} rows, expected {n}",
            b.nrows()
        )));
    }
    let m = b.ncols();
    let scale = a.norm().max(b.norm()).max(1.0);
    for lambda in eigenvalues(a)?.into_iter().filter(|z| select(z)) {
        let pencil = DMatrix::<Complex<f64>>::from_fn(n, n + m, |i, j| {
            if j < n {
                let diag = if i == j {
                    lambda
                } else {
                    Complex::new(0.0, 0.0)
                };
                Complex::new(a[(i, j)], 0.0) - diag
            } else {
                Complex::new(b[(i, j - n)], 0.0)
            }
        });
        let sv: DVector<f64> = pencil.svd(false, false).singular_values;
        let rank = sv.iter().filter(|&&s| s > PBH_TOL * scale).count();
        if rank < n {
            return Ok(false);
        }
    }
    Ok(true)
}
