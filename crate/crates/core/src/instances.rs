//! Seeded random benchmark instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::deception::{DeceptionError, Plant};
use crate::matsolve::{spectral_abscissa, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub n: usize,
    pub m_u: usize,
    pub m_a: usize,
    /// Draw `B_a = B_uE` so that `Ran(B_a) ⊆ Ran(B_u)`.
    pub range_mode: bool,
    /// Guaranteed stability margin: `α(A) ≤ −margin`.
    pub margin: f64,
}

impl InstanceSpec {
    pub fn new(n: usize, m_u: usize, m_a: usize) -> Self {
        Self {
            n,
            m_u,
            m_a,
            range_mode: false,
            margin: 0.1,
        }
    }

    pub fn range_mode(mut self, on: bool) -> Self {
        self.range_mode = on;
        self
    }
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `A = M − (α(M) + margin + s)I` with `M` standard normal and `s ∈ [0, 1)`;
/// `B_u`, `B_a` (or `E`) standard normal.
pub fn generate(spec: &InstanceSpec, seed: u64) -> Result<Plant, DeceptionError> {
    if spec.n == 0 || spec.m_u == 0 || spec.m_a == 0 {
        return Err(DeceptionError::InvalidConfig(format!(
            "dimensions must be positive, got n={}, m_u={}, m_a={}",
            spec.n, spec.m_u, spec.m_a
        )));
    }
    if !(spec.margin > 0.0 && spec.margin.is_finite()) {
        return Err(DeceptionError::InvalidConfig(format!(
            "margin must be positive, got {}",
            spec.margin
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = gaussian(&mut rng, spec.n, spec.n);
    let extra: f64 = rng.random();
    let shift = spectral_abscissa(&m)? + spec.margin + extra;
    let a = m - Matrix::identity(spec.n, spec.n) * shift;
    let b_u = gaussian(&mut rng, spec.n, spec.m_u);
    let b_a = if spec.range_mode {
        &b_u * gaussian(&mut rng, spec.m_u, spec.m_a)
    } else {
        gaussian(&mut rng, spec.n, spec.m_a)
    };
    Plant::new(a, b_u, b_a)
}
