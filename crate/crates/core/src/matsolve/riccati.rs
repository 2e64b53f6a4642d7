use super::{
    ensure_finite, ensure_square, is_stabilizable, lyapunov::solve_lyapunov_with,
    spectral_abscissa, symmetrize, LyapunovForm, Matrix, SolveError, SymPosDef,
    DEFAULT_HURWITZ_MARGIN,
};

/// Evidence attached to a Riccati solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveCertificate {
    /// ‖residual‖_F of the Riccati equation at the returned solution.
    pub residual_norm: f64,
    /// −α of the closed-loop matrix at the returned solution.
    pub hurwitz_margin: f64,
    /// Stabilizing solution found, which makes it the minimal one.
    pub minimality_certified: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct RiccatiOptions {
    pub hurwitz_margin: f64,
    pub max_iter: usize,
    /// Residual acceptance, relative to `max(1, ‖Q‖_F)`.
    pub residual_tol: f64,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        Self {
            hurwitz_margin: DEFAULT_HURWITZ_MARGIN,
            max_iter: 200,
            residual_tol: 1e-9,
        }
    }
}

fn check_dims(a: &Matrix, b: &Matrix, q: &SymPosDef, r: &SymPosDef) -> Result<usize, SolveError> {
    let n = ensure_square(a, "Riccati state matrix")?;
    ensure_finite(a, "Riccati state matrix")?;
    ensure_finite(b, "Riccati input matrix")?;
    if b.nrows() != n || q.dim() != n || r.dim() != b.ncols() {
        return Err(SolveError::DimensionMismatch(format!(
            "A {n}x{n}, B {}x{}, Q {}x{}, R {}x{}",
            b.nrows(),
            b.ncols(),
            q.dim(),
            q.dim(),
            r.dim(),
            r.dim()
        )));
    }
    Ok(n)
}

/// `B R⁻¹ Bᵀ`, symmetrized.
fn input_gramian(b: &Matrix, r: &SymPosDef) -> Matrix {
    symmetrize(&(b * r.solve(&b.transpose())))
}

/// Stabilizing (hence minimal) solution of the maximizing Riccati equation
/// `AᵀP + PA + Q + P B R⁻¹ Bᵀ P = 0`, with `A + B R⁻¹ Bᵀ P` Hurwitz.
///
/// Newton iteration started at `P = 0`, which needs `A` Hurwitz. Each step is a
/// policy evaluation of the current maximizing gain; the iterates increase
/// monotonically towards the minimal solution and fail loudly when the
/// closed loop loses stability or the iteration stalls.
pub fn solve_are_max(
    a: &Matrix,
    b: &Matrix,
    q: &SymPosDef,
    r: &SymPosDef,
) -> Result<(Matrix, SolveCertificate), SolveError> {
    solve_are_max_with(a, b, q, r, &RiccatiOptions::default())
}

pub fn solve_are_max_with(
    a: &Matrix,
    b: &Matrix,
    q: &SymPosDef,
    r: &SymPosDef,
    opts: &RiccatiOptions,
) -> Result<(Matrix, SolveCertificate), SolveError> {
    let n = check_dims(a, b, q, r)?;
    let abscissa = spectral_abscissa(a)?;
    if abscissa >= -opts.hurwitz_margin {
        return Err(SolveError::NotHurwitzInput { abscissa });
    }
    let g = input_gramian(b, r);
    let qm = q.matrix();
    let scale = qm.norm().max(1.0);

    let mut p = Matrix::zeros(n, n);
    let mut converged = false;
    for k in 0..opts.max_iter {
        let closed = a + &g * &p;
        let forcing = qm - &p * &g * &p;
        let next = match solve_lyapunov_with(
            &closed,
            &forcing,
            LyapunovForm::Standard,
            opts.hurwitz_margin,
        ) {
            Ok(x) => x,
            Err(SolveError::NotHurwitz { abscissa }) => {
                return Err(SolveError::NoStabilizingSolution {
                    reason: format!(
                        "closed loop lost stability at Newton step {k} (abscissa {abscissa:e})"
                    ),
                })
            }
            Err(e) => return Err(e),
        };
        if !next.iter().all(|v| v.is_finite()) || next.norm() > 1e12 * scale {
            return Err(SolveError::NoStabilizingSolution {
                reason: "Newton iterates diverged".into(),
            });
        }
        let delta = (&next - &p).norm();
        p = next;
        if delta <= 1e-14 * p.norm().max(1.0) {
            converged = true;
            break;
        }
    }

    let residual = a.transpose() * &p + &p * a + qm + &p * &g * &p;
    let residual_norm = residual.norm();
    let scale = term_scale(a, &p, qm, &g);
    if !converged && residual_norm > opts.residual_tol * scale {
        return Err(SolveError::NoStabilizingSolution {
            reason: format!("Newton iteration stalled (residual {residual_norm:e})"),
        });
    }
    certify(&p, residual_norm, &(a + &g * &p), scale, opts)
}

/// `max(1, ‖Q‖, ‖AᵀX + XA‖, ‖XGX‖)`: the residual is judged against the size
/// of the terms it cancels, so ill-conditioned but exact solutions pass.
fn term_scale(a: &Matrix, x: &Matrix, q: &Matrix, g: &Matrix) -> f64 {
    let linear = (a.transpose() * x + x * a).norm();
    let quadratic = (x * g * x).norm();
    1f64.max(q.norm()).max(linear).max(quadratic)
}

fn certify(
    p: &Matrix,
    residual_norm: f64,
    closed: &Matrix,
    scale: f64,
    opts: &RiccatiOptions,
) -> Result<(Matrix, SolveCertificate), SolveError> {
    let margin = -spectral_abscissa(closed)?;
    if margin <= opts.hurwitz_margin {
        return Err(SolveError::NoStabilizingSolution {
            reason: format!(
                "closed loop not Hurwitz at solution (abscissa {:e})",
                -margin
            ),
        });
    }
    if residual_norm > opts.residual_tol * scale {
        return Err(SolveError::NoStabilizingSolution {
            reason: format!("residual {residual_norm:e} above tolerance"),
        });
    }
    if p.clone().cholesky().is_none() {
        return Err(SolveError::NoStabilizingSolution {
            reason: "solution is not positive definite".into(),
        });
    }
    Ok((
        p.clone(),
        SolveCertificate {
            residual_norm,
            hurwitz_margin: margin,
            minimality_certified: true,
        },
    ))
}

/// Stabilizing solution of the minimizing (standard LQR) Riccati equation
/// `AᵀZ + ZA + Q − Z B R⁻¹ Bᵀ Z = 0`, with `A − B R⁻¹ Bᵀ Z` Hurwitz.
///
/// Matrix sign function of the Hamiltonian for the initial stabilizing
/// solution, then Newton–Kleinman polishing.
pub fn solve_are_min(
    a: &Matrix,
    b: &Matrix,
    q: &SymPosDef,
    r: &SymPosDef,
) -> Result<(Matrix, SolveCertificate), SolveError> {
    solve_are_min_with(a, b, q, r, &RiccatiOptions::default())
}

pub fn solve_are_min_with(
    a: &Matrix,
    b: &Matrix,
    q: &SymPosDef,
    r: &SymPosDef,
    opts: &RiccatiOptions,
) -> Result<(Matrix, SolveCertificate), SolveError> {
    let n = check_dims(a, b, q, r)?;
    if !is_stabilizable(a, b)? {
        return Err(SolveError::NotStabilizable);
    }
    let g = input_gramian(b, r);
    let qm = q.matrix();

    let mut h = Matrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-qm));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    let w = matrix_sign(&h).ok_or_else(|| SolveError::NoStabilizingSolution {
        reason: "Hamiltonian sign iteration did not converge".into(),
    })?;

    // [W12; W22 + I] Z = −[W11 + I; W21]
    let id = Matrix::identity(n, n);
    let mut lhs = Matrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n))
        .copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(w.view((n, n), (n, n)) + &id));
    let mut rhs = Matrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(w.view((0, 0), (n, n)) + &id)));
    rhs.view_mut((n, 0), (n, n))
        .copy_from(&(-w.view((n, 0), (n, n))));
    let mut z = lhs
        .svd(true, true)
        .solve(&rhs, 1e-13)
        .map(|x| symmetrize(&x))
        .map_err(|e| SolveError::NoStabilizingSolution { reason: e.into() })?;

    for _ in 0..opts.max_iter.min(50) {
        let closed = a - &g * &z;
        let forcing = qm + &z * &g * &z;
        let next = match solve_lyapunov_with(
            &closed,
            &forcing,
            LyapunovForm::Standard,
            opts.hurwitz_margin,
        ) {
            Ok(x) => x,
            Err(SolveError::NotHurwitz { .. }) => {
                return Err(SolveError::NoStabilizingSolution {
                    reason: "sign-function seed is not stabilizing".into(),
                })
            }
            Err(e) => return Err(e),
        };
        let delta = (&next - &z).norm();
        z = next;
        if delta <= 1e-14 * z.norm().max(1.0) {
            break;
        }
    }

    let residual = a.transpose() * &z + &z * a + qm - &z * &g * &z;
    let scale = term_scale(a, &z, qm, &g);
    certify(&z, residual.norm(), &(a - &g * &z), scale, opts)
}

/// Newton iteration for the matrix sign function with determinant scaling.
fn matrix_sign(h: &Matrix) -> Option<Matrix> {
    let dim = h.nrows() as f64;
    let mut x = h.clone();
    let mut scaling = true;
    for _ in 0..100 {
        let lu = x.clone().lu();
        let inv = lu.try_inverse()?;
        let mu = if scaling {
            let det = x.clone().lu().determinant().abs();
            if det > 0.0 && det.is_finite() {
                det.powf(-1.0 / dim)
            } else {
                1.0
            }
        } else {
            1.0
        };
        let next = (&x * mu + inv / mu) * 0.5;
        let delta = (&next - &x).norm();
        let norm = next.norm();
        x = next;
        if !norm.is_finite() {
            return None;
        }
        if delta <= 1e-12 * norm {
            return Some(x);
        }
        if delta <= 1e-3 * norm {
            scaling = false;
        }
    }
    None
}
