use super::{
    check_shapes, ensure_stabilizing, reference_gain, LearnerError, LearnerStep, LearnerTrace,
};
use crate::deception::{AdversaryObjective, Plant};
use crate::matsolve::{solve_lyapunov, symmetrize, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KleinmanOptions {
    /// Stop once `‖K_{j+1} − K_j‖_F < tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for KleinmanOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100,
        }
    }
}

/// Model-based policy iteration for the maximizing problem on the spoofed
/// plant: evaluate `(A_s + B_aK_j)ᵀP_j + P_j(A_s + B_aK_j) + Q − K_jᵀRK_j = 0`,
/// then improve `K_{j+1} = R⁻¹B_aᵀP_j`.
pub fn kleinman_pi_max(
    plant: &Plant,
    lambda: &Matrix,
    objective: &AdversaryObjective,
    k0: &Matrix,
    options: &KleinmanOptions,
) -> Result<LearnerTrace, LearnerError> {
    check_shapes(plant, lambda, objective, k0)?;
    let reference = reference_gain(plant, lambda, objective)?;
    let spoofed = plant.spoofed(lambda);
    let r = objective.r.matrix();
    let mut k = k0.clone();
    let mut iterations = vec![LearnerStep {
        distance: (&k - &reference).norm(),
        gain: k.clone(),
    }];
    let mut values = Vec::new();
    let mut converged = false;
    for j in 0..options.max_iter {
        let closed = ensure_stabilizing(&spoofed, &plant.b_a, &k, j)?;
        let forcing = symmetrize(&(objective.q.matrix() - k.transpose() * r * &k));
        let p = solve_lyapunov(&closed, &forcing)?;
        let next = objective.r.solve(&(plant.b_a.transpose() * &p));
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
