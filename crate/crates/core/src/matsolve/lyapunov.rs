use nalgebra::linalg::Schur;

use super::{
    asymmetry, ensure_finite, ensure_square, symmetrize, Matrix, SolveError,
    DEFAULT_HURWITZ_MARGIN, DEFAULT_SYMMETRY_TOL,
};

/// Which of the two transposition conventions a Lyapunov equation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LyapunovForm {
    /// `AᵀX + XA + C = 0`
    #[default]
    Standard,
    /// `AX + XAᵀ + C = 0`
    Transposed,
}

/// Solves `AᵀX + XA + C = 0` for symmetric `X`, with `A` strictly Hurwitz.
pub fn solve_lyapunov(a: &Matrix, c: &Matrix) -> Result<Matrix, SolveError> {
    solve_lyapunov_with(a, c, LyapunovForm::Standard, DEFAULT_HURWITZ_MARGIN)
}

/// Lyapunov solve with an explicit transposition convention and Hurwitz floor.
///
/// Bartels–Stewart on the real Schur form of the (possibly transposed) state
/// matrix, followed by one step of iterative refinement.
pub fn solve_lyapunov_with(
    a: &Matrix,
    c: &Matrix,
    form: LyapunovForm,
    hurwitz_margin: f64,
) -> Result<Matrix, SolveError> {
    let n = ensure_square(a, "Lyapunov state matrix")?;
    if c.nrows() != n || c.ncols() != n {
        return Err(SolveError::DimensionMismatch(format!(
            "Lyapunov forcing is {}x{}, expected {n}x{n}",
            c.nrows(),
            c.ncols()
        )));
    }
    ensure_finite(a, "Lyapunov state matrix")?;
    ensure_finite(c, "Lyapunov forcing")?;
    let asym = asymmetry(c);
    if asym > DEFAULT_SYMMETRY_TOL {
        return Err(SolveError::NonSymmetricInput { asymmetry: asym });
    }
    let c = symmetrize(c);

    // Reduce both conventions to FᵀX + XF + C = 0.
    let f = match form {
        LyapunovForm::Standard => a.clone(),
        LyapunovForm::Transposed => a.transpose(),
    };
    let factor = SchurFactor::new(&f)?;
    let abscissa = factor.abscissa();
    if abscissa >= -hurwitz_margin {
        return Err(SolveError::NotHurwitz { abscissa });
    }

    let mut x = factor.solve(&(-&c));
    let residual = f.transpose() * &x + &x * &f + &c;
    x += factor.solve(&(-residual));
    Ok(symmetrize(&x))
}

/// Real Schur factorisation `F = U T Uᵀ` with the diagonal block layout of `T`.
struct SchurFactor {
    u: Matrix,
    t: Matrix,
    blocks: Vec<(usize, usize)>,
}

impl SchurFactor {
    fn new(f: &Matrix) -> Result<Self, SolveError> {
        let n = f.nrows();
        let schur = Schur::try_new(f.clone(), f64::EPSILON, 10_000 * n.max(1))
            .ok_or(SolveError::EigenFailure)?;
        let (u, t) = schur.unpack();
        let mut blocks = Vec::with_capacity(n);
        let mut i = 0;
        while i < n {
            if i + 1 < n && t[(i + 1, i)] != 0.0 {
                blocks.push((i, 2));
                i += 2;
            } else {
                blocks.push((i, 1));
                i += 1;
            }
        }
        Ok(Self { u, t, blocks })
    }

    fn abscissa(&self) -> f64 {
        self.blocks
            .iter()
            .map(|&(s, size)| {
                if size == 1 {
                    self.t[(s, s)]
                } else {
                    let (p, q, r, w) = (
                        self.t[(s, s)],
                        self.t[(s, s + 1)],
                        self.t[(s + 1, s)],
                        self.t[(s + 1, s + 1)],
                    );
                    let half_tr = 0.5 * (p + w);
                    let disc = 0.25 * (p - w) * (p - w) + q * r;
                    if disc >= 0.0 {
                        half_tr + disc.sqrt()
                    } else {
                        half_tr
                    }
                }
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Solves `FᵀX + XF = rhs`.
    fn solve(&self, rhs: &Matrix) -> Matrix {
        let n = self.t.nrows();
        let rhs_t = self.u.transpose() * rhs * &self.u;
        let mut y = Matrix::zeros(n, n);
        let t = &self.t;

        for &(rk, pk) in &self.blocks {
            for &(cl, ql) in &self.blocks {
                // Tₖₖᵀ Y + Y Tₗₗ = Ĉ − Σ_{i<k} Tᵢₖᵀ Yᵢₗ − Σ_{j<l} Yₖⱼ Tⱼₗ
                let mut block = rhs_t.view((rk, cl), (pk, ql)).into_owned();
                if rk > 0 {
                    let t_up = t.view((0, rk), (rk, pk));
                    let y_up = y.view((0, cl), (rk, ql));
                    block -= t_up.transpose() * y_up;
                }
                if cl > 0 {
                    let y_left = y.view((rk, 0), (pk, cl));
                    let t_left = t.view((0, cl), (cl, ql));
                    block -= y_left * t_left;
                }
                let tkk = t.view((rk, rk), (pk, pk));
                let tll = t.view((cl, cl), (ql, ql));
                let sol = solve_small_sylvester(&tkk.into_owned(), &tll.into_owned(), &block);
                y.view_mut((rk, cl), (pk, ql)).copy_from(&sol);
            }
        }
        &self.u * y * self.u.transpose()
    }
}

/// Solves `Sᵀ Y + Y T = C` for blocks of order at most two via the
/// Kronecker form `(I ⊗ Sᵀ + Tᵀ ⊗ I) vec(Y) = vec(C)`.
fn solve_small_sylvester(s: &Matrix, t: &Matrix, c: &Matrix) -> Matrix {
    let p = s.nrows();
    let q = t.nrows();
    let dim = p * q;
    let mut k = Matrix::zeros(dim, dim);
    for col in 0..q {
        for row in 0..p {
            let eq = col * p + row;
            for i in 0..p {
                k[(eq, col * p + i)] += s[(i, row)];
            }
            for j in 0..q {
                k[(eq, j * p + row)] += t[(j, col)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_iterator(dim, c.iter().cloned());
    let sol = k
        .lu()
        .solve(&rhs)
        .unwrap_or_else(|| nalgebra::DVector::from_element(dim, f64::NAN));
    Matrix::from_column_slice(p, q, sol.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    /// vec(X) = −(I⊗Aᵀ + Aᵀ⊗I)⁻¹ vec(C), column-major.
    fn kron_oracle(a: &Matrix, c: &Matrix) -> Matrix {
        let n = a.nrows();
        let at = a.transpose();
        let id = Matrix::identity(n, n);
        let big = id.kronecker(&at) + at.kronecker(&id);
        let rhs = nalgebra::DVector::from_iterator(n * n, c.iter().map(|v| -v));
        let sol = big.lu().solve(&rhs).unwrap();
        Matrix::from_column_slice(n, n, sol.as_slice())
    }

    #[test]
    fn scalar_cases() {
        let x = solve_lyapunov(&dmatrix![-1.0], &dmatrix![2.0]).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-15);
        let x = solve_lyapunov(&dmatrix![-0.8], &dmatrix![1.0]).unwrap();
        assert!((x[(0, 0)] - 0.625).abs() < 1e-15);
    }

    #[test]
    fn upper_triangular_against_kronecker() {
        let a = dmatrix![-1.0, 1.0; 0.0, -2.0];
        let c = Matrix::identity(2, 2);
        let x = solve_lyapunov(&a, &c).unwrap();
        let oracle = kron_oracle(&a, &c);
        assert!((&x - &oracle).norm() < 1e-12);
        let res = a.transpose() * &x + &x * &a + &c;
        assert!(res.norm() < 1e-12);
    }

    #[test]
    fn complex_pair_block() {
        let a = dmatrix![-0.5, 3.0, 0.0; -3.0, -0.5, 1.0; 0.2, 0.0, -2.0];
        let c = dmatrix![2.0, 0.5, 0.1; 0.5, 1.0, 0.0; 0.1, 0.0, 3.0];
        let x = solve_lyapunov(&a, &c).unwrap();
        assert!((&x - kron_oracle(&a, &c)).norm() < 1e-10 * x.norm());
    }

    #[test]
    fn transposed_form() {
        let a = dmatrix![-1.0, 4.0; 0.0, -3.0];
        let c = dmatrix![1.0, 0.3; 0.3, 2.0];
        let x = solve_lyapunov_with(&a, &c, LyapunovForm::Transposed, 1e-9).unwrap();
        let res = &a * &x + &x * a.transpose() + &c;
        assert!(res.norm() < 1e-12);
    }

    #[test]
    fn rejects_unstable_and_asymmetric() {
        assert!(matches!(
            solve_lyapunov(&dmatrix![0.1], &dmatrix![1.0]),
            Err(SolveError::NotHurwitz { .. })
        ));
        assert!(matches!(
            solve_lyapunov(
                &dmatrix![-1.0, 0.0; 0.0, -1.0],
                &dmatrix![1.0, 1.0; 0.0, 1.0]
            ),
            Err(SolveError::NonSymmetricInput { .. })
        ));
    }

    #[test]
    fn positive_forcing_gives_positive_solution() {
        let a = dmatrix![-2.0, 1.0, 0.5; 0.0, -1.0, 2.0; -1.0, 0.0, -3.0];
        let x = solve_lyapunov(&a, &Matrix::identity(3, 3)).unwrap();
        assert!(x.cholesky().is_some());
    }
}
