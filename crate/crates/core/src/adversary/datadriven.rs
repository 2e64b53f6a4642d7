//! Off-policy integral policy iteration from trajectory data.
//!
//! Along any trajectory of the spoofed plant with attack `a`, the value of
//! policy `K_j` and its improvement `K_{j+1} = R⁻¹B_aᵀP_j` satisfy
//!
//! `x(t₁)ᵀP_jx(t₁) − x(t₀)ᵀP_jx(t₀) − 2∫(a − K_jx)ᵀRK_{j+1}x dt = −∫xᵀ(Q − K_jᵀRK_j)x dt`
//!
//! which is linear in `(P_j, K_{j+1})`. Stacking it over many intervals gives a
//! least-squares problem that needs neither `A` nor `Λ`.

use nalgebra::DVector;

use super::{
    check_shapes, ensure_stabilizing, reference_gain, simulate_trajectory, LearnerError,
    LearnerStep, LearnerTrace, TrajectorySpec,
};
use crate::deception::{AdversaryObjective, Plant};
use crate::matsolve::{symmetrize, Matrix};

/// What the learner knows about the plant besides the state and attack data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InformationPattern {
    /// Unknown `A` and `B_a`: `P_j` and `K_{j+1}` are both regressed.
    UnknownDynamics,
    /// Unknown `A`, known `B_a`: only `P_j` is regressed.
    KnownInputMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataDrivenOptions {
    pub pattern: InformationPattern,
    /// RK4 steps per integration interval (even, for Simpson's rule).
    pub interval_steps: usize,
    /// Stop once `‖K_{j+1} − K_j‖_F < tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Smallest accepted `σ_min/σ_max` of the column-normalized regressor.
    pub rank_tol: f64,
}

impl Default for DataDrivenOptions {
    fn default() -> Self {
        Self {
            pattern: InformationPattern::UnknownDynamics,
            interval_steps: 20,
            tol: 1e-8,
            max_iter: 50,
            rank_tol: 1e-8,
        }
    }
}

/// Per-interval data the regressions are built from.
struct IntervalData {
    /// `x(t₁)x(t₁)ᵀ − x(t₀)x(t₀)ᵀ`
    boundary: Matrix,
    /// `∫xxᵀ`
    xx: Matrix,
    /// `∫axᵀ`
    ax: Matrix,
}

fn simpson<F: Fn(usize) -> Matrix>(start: usize, steps: usize, dt: f64, f: F) -> Matrix {
    let mut acc = f(start) + f(start + steps);
    for k in 1..steps {
        acc += f(start + k) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * (dt / 3.0)
}

fn outer(u: &DVector<f64>, v: &DVector<f64>) -> Matrix {
    u * v.transpose()
}

/// Index pairs `(r, s)` with `r ≤ s`.
fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|r| (r..n).map(move |s| (r, s))).collect()
}

/// Least squares with a rank check on the column-normalized regressor.
fn least_squares(
    phi: &Matrix,
    y: &DVector<f64>,
    rank_tol: f64,
) -> Result<DVector<f64>, LearnerError> {
    let scales: Vec<f64> = phi
        .column_iter()
        .map(|c| {
            let n = c.norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect();
    let mut normalized = phi.clone();
    for (j, s) in scales.iter().enumerate() {
        normalized.column_mut(j).unscale_mut(*s);
    }
    let svd = normalized.svd(true, true);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if ratio.is_nan() || ratio < rank_tol {
        return Err(LearnerError::RankDeficientData { ratio });
    }
    let theta = svd
        .solve(y, 0.0)
        .map_err(|e| LearnerError::InvalidSpec(e.to_string()))?;
    Ok(DVector::from_iterator(
        theta.len(),
        theta.iter().zip(&scales).map(|(t, s)| t / s),
    ))
}

/// Learns the attack from data of the spoofed plant, collected once under the
/// behavior policy `a = K0x + e(t)`.
pub fn datadriven_pi(
    plant: &Plant,
    lambda: &Matrix,
    objective: &AdversaryObjective,
    spec: &TrajectorySpec,
    k0: &Matrix,
    options: &DataDrivenOptions,
) -> Result<LearnerTrace, LearnerError> {
    check_shapes(plant, lambda, objective, k0)?;
    let h = options.interval_steps;
    if h < 2 || !h.is_multiple_of(2) {
        return Err(LearnerError::InvalidSpec(format!(
            "interval_steps must be even and at least 2, got {h}"
        )));
    }
    let reference = reference_gain(plant, lambda, objective)?;
    let data = simulate_trajectory(plant, lambda, k0, spec)?;
    let dt = data.dt;
    let intervals: Vec<IntervalData> = (0..(data.states.len() - 1) / h)
        .map(|i| {
            let s = i * h;
            let (x0, x1) = (&data.states[s], &data.states[s + h]);
            IntervalData {
                boundary: outer(x1, x1) - outer(x0, x0),
                xx: simpson(s, h, dt, |k| outer(&data.states[k], &data.states[k])),
                ax: simpson(s, h, dt, |k| outer(&data.attacks[k], &data.states[k])),
            }
        })
        .collect();

    let (n, m_a) = (plant.n(), plant.m_a());
    let pairs = upper_pairs(n);
    let p_cols = pairs.len();
    let k_cols = match options.pattern {
        InformationPattern::UnknownDynamics => m_a * n,
        InformationPattern::KnownInputMatrix => 0,
    };
    if intervals.len() < p_cols + k_cols {
        return Err(LearnerError::RankDeficientData { ratio: 0.0 });
    }
    let spoofed = plant.spoofed(lambda);
    let r = objective.r.matrix();
    let q = objective.q.matrix();

    let mut k = k0.clone();
    let mut iterations = vec![LearnerStep {
        distance: (&k - &reference).norm(),
        gain: k.clone(),
    }];
    let mut values = Vec::new();
    let mut converged = false;
    for j in 0..options.max_iter {
        ensure_stabilizing(&spoofed, &plant.b_a, &k, j)?;
        let weight = q - k.transpose() * r * &k;
        let mut phi = Matrix::zeros(intervals.len(), p_cols + k_cols);
        let mut y = DVector::zeros(intervals.len());
        for (row, iv) in intervals.iter().enumerate() {
            // ∫(a − K_jx)xᵀ
            let off = &iv.ax - &k * &iv.xx;
            let coupling = match options.pattern {
                InformationPattern::UnknownDynamics => None,
                InformationPattern::KnownInputMatrix => Some(&plant.b_a * &off),
            };
            for (col, &(a, b)) in pairs.iter().enumerate() {
                let mut c = if a == b {
                    iv.boundary[(a, a)]
                } else {
                    2.0 * iv.boundary[(a, b)]
                };
                if let Some(w) = &coupling {
                    c -= 2.0
                        * if a == b {
                            w[(a, a)]
                        } else {
                            w[(a, b)] + w[(b, a)]
                        };
                }
                phi[(row, col)] = c;
            }
            if k_cols > 0 {
                let rk = r * &off;
                for p in 0..m_a {
                    for s in 0..n {
                        phi[(row, p_cols + p * n + s)] = -2.0 * rk[(p, s)];
                    }
                }
            }
            y[row] = -(&weight * &iv.xx).trace();
        }
        let theta = least_squares(&phi, &y, options.rank_tol)?;
        let mut p = Matrix::zeros(n, n);
        for (col, &(a, b)) in pairs.iter().enumerate() {
            p[(a, b)] = theta[col];
            p[(b, a)] = theta[col];
        }
        let p = symmetrize(&p);
        let next = match options.pattern {
            InformationPattern::UnknownDynamics => {
                Matrix::from_fn(m_a, n, |a, b| theta[p_cols + a * n + b])
            }
            InformationPattern::KnownInputMatrix => {
                objective.r.solve(&(plant.b_a.transpose() * &p))
            }
        };
        values.push(p);
        let change = (&next - &k).norm();
        iterations.push(LearnerStep {
            distance: (&next - &reference).norm(),
            gain: next.clone(),
        });
        k = next;
        if change < options.tol {
            converged = true;
            break;
        }
    }
    Ok(LearnerTrace {
        iterations,
        values,
        reference,
        converged,
    })
}
