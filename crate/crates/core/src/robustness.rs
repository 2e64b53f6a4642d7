//! Deception quality when the adversary's true weights `(Q̂, R̂)` differ from
//! the `(Q, R)` the defender designed against.

use std::fmt;

use thiserror::Error;

use crate::deception::{
    deception_cost, nominal_attack, spoofed_attack, AdversaryObjective, DeceptionError,
    DeceptionProblem,
};
use crate::matsolve::{symmetric_eigenvalues, Matrix, SymPosDef};

/// Denominators below this magnitude give [`Ratio::NotApplicable`].
pub const RATIO_FLOOR: f64 = 1e-12;

/// Slack on the PSD-order tests.
const ORDER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MismatchSpec {
    pub q_hat: SymPosDef,
    pub r_hat: SymPosDef,
}

impl MismatchSpec {
    pub fn new(
        problem: &DeceptionProblem,
        q_hat: SymPosDef,
        r_hat: SymPosDef,
    ) -> Result<Self, DeceptionError> {
        if q_hat.dim() != problem.objective.q.dim() || r_hat.dim() != problem.objective.r.dim() {
            return Err(DeceptionError::DimensionMismatch(format!(
                "Q_hat must be {0}x{0} and R_hat {1}x{1}",
                problem.objective.q.dim(),
                problem.objective.r.dim()
            )));
        }
        Ok(Self { q_hat, r_hat })
    }

    /// The designed weights, i.e. no mismatch.
    pub fn exact(problem: &DeceptionProblem) -> Self {
        Self {
            q_hat: problem.objective.q.clone(),
            r_hat: problem.objective.r.clone(),
        }
    }

    fn as_problem(&self, problem: &DeceptionProblem) -> DeceptionProblem {
        DeceptionProblem {
            objective: AdversaryObjective::new(self.q_hat.clone(), self.r_hat.clone()),
            ..problem.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MismatchedCost {
    /// `Ĵ(Λ) = ‖K̂_u(Λ) − K̄‖²_F + tr(ΛᵀΓΛ)`.
    pub j_hat: f64,
    /// `K̂_u = R̂⁻¹B_aᵀP̂_u(Λ)`.
    pub k_hat_u: Matrix,
}

pub fn mismatched_cost(
    problem: &DeceptionProblem,
    mismatch: &MismatchSpec,
    lambda: &Matrix,
) -> Result<MismatchedCost, DeceptionError> {
    let actual = mismatch.as_problem(problem);
    let k_hat_u = spoofed_attack(&actual, lambda)?;
    let j_hat = deception_cost(&actual, lambda)?;
    Ok(MismatchedCost { j_hat, k_hat_u })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Value(f64),
    /// Denominator too close to zero.
    NotApplicable,
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Value(v) => write!(f, "{v}"),
            Ratio::NotApplicable => f.write_str("n/a"),
        }
    }
}

/// Entrywise quotients, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioTable {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Ratio>,
}

impl RatioTable {
    pub fn get(&self, i: usize, j: usize) -> Ratio {
        self.entries[i * self.cols + j]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("shape mismatch: numerator is {num:?}, denominator is {den:?}")]
pub struct ShapeMismatch {
    pub num: (usize, usize),
    pub den: (usize, usize),
}

/// `[K_num]_ij / [K_den]_ij`.
pub fn suppression_ratios(k_num: &Matrix, k_den: &Matrix) -> Result<RatioTable, ShapeMismatch> {
    if k_num.shape() != k_den.shape() {
        return Err(ShapeMismatch {
            num: k_num.shape(),
            den: k_den.shape(),
        });
    }
    let (rows, cols) = k_num.shape();
    let mut entries = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let den = k_den[(i, j)];
            entries.push(if den.abs() < RATIO_FLOOR {
                Ratio::NotApplicable
            } else {
                Ratio::Value(k_num[(i, j)] / den)
            });
        }
    }
    Ok(RatioTable {
        rows,
        cols,
        entries,
    })
}

/// Outcome of the `Ĵ < J̃` comparison for a zero target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundStatus {
    /// `(Q̂, R̂) = (Q, R)`; the gap is zero.
    NoMismatch,
    /// `Q̂ ⪯ Q`, `R̂ ⪰ R` and `Ĵ < J̃` as expected.
    StrictInequalityHolds,
    /// `Q̂ ⪯ Q`, `R̂ ⪰ R` but `Ĵ ≥ J̃`.
    StrictInequalityViolated,
    /// The weights are not ordered; only the gap is reported.
    GapOnly,
    /// `K̄ ≠ 0`: the comparison does not apply and the gap is descriptive.
    NonZeroTarget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessReport {
    pub j_tilde: f64,
    pub j_hat: f64,
    /// `Ĵ − J̃`.
    pub gap: f64,
    pub k_u: Matrix,
    pub k_hat_u: Matrix,
    /// `[K_u(Λ̂)]_ij / [K*]_ij`, when the nominal attack exists.
    pub ratios: Option<RatioTable>,
    /// `[K̂_u(Λ̂)]_ij / [K̂*]_ij`, when the mismatched nominal attack exists.
    pub mismatched_ratios: Option<RatioTable>,
    pub weights_ordered: bool,
    pub bound_status: BoundStatus,
}

/// `X ⪯ Y` up to a relative slack.
fn psd_le(x: &Matrix, y: &Matrix) -> bool {
    let scale = 1.0 + x.norm().max(y.norm());
    symmetric_eigenvalues(&(y - x))
        .iter()
        .all(|&e| e >= -ORDER_TOL * scale)
}

pub fn robustness_report(
    problem: &DeceptionProblem,
    mismatch: &MismatchSpec,
    lambda_hat: &Matrix,
) -> Result<RobustnessReport, DeceptionError> {
    let j_tilde = deception_cost(problem, lambda_hat)?;
    let k_u = spoofed_attack(problem, lambda_hat)?;
    let MismatchedCost { j_hat, k_hat_u } = mismatched_cost(problem, mismatch, lambda_hat)?;
    let ratios = nominal_attack(&problem.plant, &problem.objective)
        .ok()
        .map(|nom| suppression_ratios(&k_u, &nom.k_star).expect("same shape"));
    let actual = mismatch.as_problem(problem);
    let mismatched_ratios = nominal_attack(&actual.plant, &actual.objective)
        .ok()
        .map(|nom| suppression_ratios(&k_hat_u, &nom.k_star).expect("same shape"));

    let q = problem.objective.q.matrix();
    let r = problem.objective.r.matrix();
    let weights_ordered = psd_le(mismatch.q_hat.matrix(), q) && psd_le(r, mismatch.r_hat.matrix());
    let exact = mismatch.q_hat.matrix() == q && mismatch.r_hat.matrix() == r;
    let bound_status = if exact {
        BoundStatus::NoMismatch
    } else if problem.k_bar.iter().any(|&v| v != 0.0) {
        BoundStatus::NonZeroTarget
    } else if weights_ordered {
        if j_hat < j_tilde {
            BoundStatus::StrictInequalityHolds
        } else {
            BoundStatus::StrictInequalityViolated
        }
    } else {
        BoundStatus::GapOnly
    };
    Ok(RobustnessReport {
        j_tilde,
        j_hat,
        gap: j_hat - j_tilde,
        k_u,
        k_hat_u,
        ratios,
        mismatched_ratios,
        weights_ordered,
        bound_status,
    })
}
