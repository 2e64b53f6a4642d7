//! Simulated adversary learners.
//!
//! Both learners only interact with the spoofed plant `A + B_uΛ`. Under
//! deception they converge to `K_u(Λ)` rather than the nominal `K*`.

mod datadriven;
mod kleinman;
mod simulate;

pub use datadriven::{datadriven_pi, DataDrivenOptions, InformationPattern};
pub use kleinman::{kleinman_pi_max, KleinmanOptions};
pub use simulate::{simulate_trajectory, Exploration, Trajectory, TrajectorySpec};

use std::fmt::Write as _;

use thiserror::Error;

use crate::deception::{AdversaryObjective, Plant};
use crate::matsolve::{solve_are_max, Matrix, SolveError, DEFAULT_HURWITZ_MARGIN};

/// Largest state norm tolerated by the simulator.
pub const BLOWUP_NORM: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnerError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("policy at iteration {iteration} does not stabilize the spoofed plant (abscissa {abscissa:e})")]
    PolicyDestabilized { iteration: usize, abscissa: f64 },
    #[error("regressor is rank deficient (singular value ratio {ratio:e})")]
    RankDeficientData { ratio: f64 },
    #[error("state norm exceeded {BLOWUP_NORM:e} at t = {time}")]
    Blowup { time: f64 },
    #[error("invalid trajectory or learner settings: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerStep {
    pub gain: Matrix,
    /// `‖K_j − K_ref‖_F`.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerTrace {
    pub iterations: Vec<LearnerStep>,
    /// Policy-evaluation solutions `P_j` (one per evaluated policy).
    pub values: Vec<Matrix>,
    /// `K_u(Λ)`, the gain the distances are measured against.
    pub reference: Matrix,
    pub converged: bool,
}

impl LearnerTrace {
    pub fn final_gain(&self) -> &Matrix {
        &self.iterations.last().expect("trace is never empty").gain
    }

    pub fn final_distance(&self) -> f64 {
        self.iterations
            .last()
            .expect("trace is never empty")
            .distance
    }

    /// `iteration,distance` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,distance\n");
        for (j, step) in self.iterations.iter().enumerate() {
            let _ = writeln!(out, "{j},{:?}", step.distance);
        }
        out
    }
}

/// `K_u(Λ)` from the spoofed Riccati equation, used as the distance reference.
pub(crate) fn reference_gain(
    plant: &Plant,
    lambda: &Matrix,
    objective: &AdversaryObjective,
) -> Result<Matrix, LearnerError> {
    let spoofed = plant.spoofed(lambda);
    let (p, _) = solve_are_max(&spoofed, &plant.b_a, &objective.q, &objective.r)?;
    Ok(objective.r.solve(&(plant.b_a.transpose() * p)))
}

pub(crate) fn check_shapes(
    plant: &Plant,
    lambda: &Matrix,
    objective: &AdversaryObjective,
    k0: &Matrix,
) -> Result<(), LearnerError> {
    let (n, m_u, m_a) = (plant.n(), plant.m_u(), plant.m_a());
    if lambda.shape() != (m_u, n) || k0.shape() != (m_a, n) {
        return Err(LearnerError::DimensionMismatch(format!(
            "Lambda must be {m_u}x{n} and K0 {m_a}x{n}"
        )));
    }
    if objective.q.dim() != n || objective.r.dim() != m_a {
        return Err(LearnerError::DimensionMismatch(format!(
            "Q must be {n}x{n} and R {m_a}x{m_a}"
        )));
    }
    Ok(())
}

/// Errors when `A_spoof + B_aK` is not Hurwitz.
pub(crate) fn ensure_stabilizing(
    spoofed: &Matrix,
    b_a: &Matrix,
    k: &Matrix,
    iteration: usize,
) -> Result<Matrix, LearnerError> {
    let closed = spoofed + b_a * k;
    let abscissa = crate::matsolve::spectral_abscissa(&closed)?;
    if abscissa >= -DEFAULT_HURWITZ_MARGIN {
        return Err(LearnerError::PolicyDestabilized {
            iteration,
            abscissa,
        });
    }
    Ok(closed)
}
