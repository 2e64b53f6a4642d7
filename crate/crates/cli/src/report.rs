//! The report document written as `report.json`.
//!
//! Reports carry no timestamps or durations so that identical runs produce
//! identical bytes.

use serde::{Deserialize, Serialize};

use lqdeceive::deception::{DeceptionResult, Energy, ExistenceCertificate};
use lqdeceive::robustness::{Ratio, RatioTable};

use crate::config::{from_matrix, Rows};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Ok,
    Converged,
    MaxIterations,
    InputError,
    NoStabilizingSolution,
    InfeasibleStart,
    DomainExit,
    LearnerFailed,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok | Status::Converged | Status::MaxIterations => 0,
            Status::InputError => 1,
            Status::NoStabilizingSolution => 2,
            Status::InfeasibleStart | Status::DomainExit => 3,
            Status::LearnerFailed | Status::Error => 4,
        }
    }
}

/// A number, or a marker string where the value is not a finite real
/// (`"inf"` for unstable loops, `"n/a"` for undefined ratios).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Value(f64),
    Marker(String),
}

impl Num {
    pub fn csv(&self) -> String {
        match self {
            Num::Value(v) => format!("{v:?}"),
            Num::Marker(m) => m.clone(),
        }
    }
}

impl From<Energy> for Num {
    fn from(e: Energy) -> Self {
        match e {
            Energy::Finite(v) => Num::Value(v),
            Energy::Infinite => Num::Marker("inf".into()),
        }
    }
}

impl From<Ratio> for Num {
    fn from(r: Ratio) -> Self {
        match r {
            Ratio::Value(v) => Num::Value(v),
            Ratio::NotApplicable => Num::Marker("n/a".into()),
        }
    }
}

pub fn ratio_rows(table: &RatioTable) -> Vec<Vec<Num>> {
    (0..table.rows)
        .map(|i| (0..table.cols).map(|j| table.get(i, j).into()).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve_attack: Option<SolveAttackReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learner: Option<LearnerReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual: Option<DualReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robustness: Option<RobustnessSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergyReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateReport>,
}

impl RunReport {
    pub fn new(command: &str, status: Status) -> Self {
        Self {
            schema_version: crate::config::SCHEMA_VERSION,
            command: command.into(),
            status,
            error: None,
            seed: None,
            solve_attack: None,
            design: None,
            learner: None,
            dual: None,
            robustness: None,
            energy: None,
            generate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub s: Rows,
    pub strengthened_eps: Option<f64>,
}

impl From<&ExistenceCertificate> for CertificateReport {
    fn from(c: &ExistenceCertificate) -> Self {
        Self {
            holds: c.holds,
            lhs: c.lhs,
            rhs: c.rhs,
            s: from_matrix(&c.s),
            strengthened_eps: c.strengthened_eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveAttackReport {
    pub k_star: Rows,
    pub p: Rows,
    pub residual_norm: f64,
    pub hurwitz_margin: f64,
    /// Eigenvalues of `A + B_aK*` as `[re, im]`, sorted.
    pub closed_loop_spectrum: Vec<[f64; 2]>,
    /// Present when the config supplies gamma.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub existence: Option<CertificateReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stationarity {
    pub riccati: f64,
    pub adjoint: f64,
    pub gain: f64,
}

/// Fields shared by the primary and dual solver reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub solver_status: String,
    pub iterations: usize,
    pub initial_gain: Rows,
    pub initial_cost: f64,
    pub cost: f64,
    pub final_grad_norm: f64,
    pub stationarity: Stationarity,
    pub omega: f64,
    pub omega_final: f64,
    pub step_size_bound_exceeded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_bound: Option<f64>,
    pub domain_retries: usize,
    pub uniform_stability_verified: bool,
}

impl SolverSummary {
    pub fn new(result: &DeceptionResult, omega: f64) -> Self {
        let first = &result.trace[0];
        let last = result.trace.last().expect("trace is never empty");
        Self {
            solver_status: format!("{:?}", result.status),
            iterations: result.trace.len() - 1,
            initial_gain: from_matrix(&first.gain),
            initial_cost: first.cost,
            cost: result.cost,
            final_grad_norm: last.grad_norm,
            stationarity: Stationarity {
                riccati: result.stationarity.riccati,
                adjoint: result.stationarity.adjoint,
                gain: result.stationarity.gain,
            },
            omega,
            omega_final: result.omega_final,
            step_size_bound_exceeded: result.step_size_bound_exceeded,
            omega_bound: result.omega_bound,
            domain_retries: result.domain_retries,
            uniform_stability_verified: result.uniform_stability_verified,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub solver: SolverSummary,
    pub lambda_hat: Rows,
    pub p_u_hat: Rows,
    pub pi_hat: Rows,
    pub k_u_hat: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_star: Option<Rows>,
    /// `[K_u(Λ̂)]_ij / [K*]_ij`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratios: Option<Vec<Vec<Num>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub existence: Option<CertificateReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub existence_note: Option<String>,
    /// `α(A + B_uΛ̂ + B_aK_u(Λ̂))`
    pub deceived_abscissa: f64,
    /// `α(A + B_aK_u(Λ̂))`
    pub attack_only_abscissa: f64,
    pub energy: Vec<EnergyRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerOutcome {
    pub name: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_gain: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_distance: Option<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerReport {
    pub lambda: Rows,
    /// `config` or `designed`.
    pub lambda_source: String,
    /// `K_u(Λ)`, the gain both learners should reach.
    pub predicted_gain: Rows,
    pub learners: Vec<LearnerOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualReport {
    pub solver: SolverSummary,
    pub range_condition: bool,
    pub n_star: Rows,
    pub z: Rows,
    pub n_bar: Rows,
    pub l_hat: Rows,
    pub z_a_hat: Rows,
    pub n_a_hat: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSection {
    pub lambda: Rows,
    pub lambda_source: String,
    pub j_tilde: f64,
    pub j_hat: f64,
    pub gap: f64,
    pub bound_status: String,
    pub weights_ordered: bool,
    pub k_u: Rows,
    pub k_hat_u: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratios: Option<Vec<Vec<Num>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mismatched_ratios: Option<Vec<Vec<Num>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub system: String,
    pub energy: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub x0: Vec<f64>,
    pub rows: Vec<EnergyRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateReport {
    pub n: usize,
    pub m_u: usize,
    pub m_a: usize,
    pub range_mode: bool,
    pub abscissa: f64,
    pub range_condition: bool,
}
