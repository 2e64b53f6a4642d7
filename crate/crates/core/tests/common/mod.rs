#![allow(dead_code)]

use lqdeceive::deception::{nominal_attack, AdversaryObjective, DeceptionProblem};
use lqdeceive::instances::{generate, InstanceSpec};
use lqdeceive::matsolve::{Matrix, SymPosDef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Random instance with `Q = I`, `K̄ = 0` and `R = 4r·I`, where `r` is the
/// first power of two for which the nominal attack exists.
pub fn random_problem(
    seed: u64,
    n: usize,
    m_u: usize,
    m_a: usize,
    range: bool,
    gamma: f64,
) -> DeceptionProblem {
    let plant = generate(&InstanceSpec::new(n, m_u, m_a).range_mode(range), seed).unwrap();
    let q = SymPosDef::scaled_identity(n, 1.0);
    let mut r = 1.0;
    while nominal_attack(
        &plant,
        &AdversaryObjective::new(q.clone(), SymPosDef::scaled_identity(m_a, r)),
    )
    .is_err()
    {
        r *= 2.0;
    }
    let objective = AdversaryObjective::new(q, SymPosDef::scaled_identity(m_a, 4.0 * r));
    DeceptionProblem::new(
        plant,
        objective,
        Matrix::zeros(m_a, n),
        SymPosDef::scaled_identity(m_u, gamma),
    )
    .unwrap()
}

pub fn scalar_problem(r: f64, k_bar: f64, gamma: f64) -> DeceptionProblem {
    use lqdeceive::deception::Plant;
    use nalgebra::dmatrix;
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

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random Hurwitz matrix with `α ≤ −margin`.
pub fn hurwitz(rng: &mut ChaCha8Rng, n: usize, margin: f64) -> Matrix {
    let m = gaussian(rng, n, n);
    let alpha = m
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|c| c.re)
        .fold(f64::NEG_INFINITY, f64::max);
    m - Matrix::identity(n, n) * (alpha + margin)
}

/// Central finite differences of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&Matrix) -> f64, x: &Matrix, h: f64) -> Matrix {
    Matrix::from_fn(x.nrows(), x.ncols(), |i, j| {
        let mut plus = x.clone();
        plus[(i, j)] += h;
        let mut minus = x.clone();
        minus[(i, j)] -= h;
        (f(&plus) - f(&minus)) / (2.0 * h)
    })
}

/// `vec(X) = −(I⊗Aᵀ + Aᵀ⊗I)⁻¹vec(C)` for `AᵀX + XA + C = 0`.
pub fn kronecker_lyapunov(a: &Matrix, c: &Matrix) -> Matrix {
    let n = a.nrows();
    let at = a.transpose();
    let eye = Matrix::identity(n, n);
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -Matrix::from_column_slice(n * n, 1, c.as_slice());
    let sol = op.lu().solve(&rhs).unwrap();
    Matrix::from_column_slice(n, n, sol.as_slice())
}
