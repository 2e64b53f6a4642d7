//! The JSON run configuration.
//!
//! Matrices are arrays of rows. Every section is optional; each subcommand
//! asks for the ones it needs and reports an input error when one is missing.

use std::path::PathBuf;

use lqdeceive::deception::{
    AdversaryObjective, BsorConfig, DeceptionProblem, InitMode, Plant, GAMMA_FLOOR,
};
use lqdeceive::{Matrix, SymPosDef};
use serde::{Deserialize, Serialize};

use crate::Failure;

pub const SCHEMA_VERSION: u32 = 1;

/// Row-major matrix as it appears in JSON.
pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant: Option<PlantConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveConfig>,
    /// Target gain K̄; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_bar: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<GammaConfig>,
    /// A fixed deception gain. Commands that need one design it when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mismatch: Option<MismatchConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual: Option<DualConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergyConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub n: usize,
    pub m_u: usize,
    pub m_a: usize,
    #[serde(default)]
    pub range_mode: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub a: Rows,
    pub b_u: Rows,
    pub b_a: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub q: Rows,
    pub r: Rows,
}

/// `γ` (meaning `γI`, with 0 mapped to the floor) or a full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaConfig {
    Scalar(f64),
    Matrix(Rows),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    /// `zero`, `deep` or `deep:SIGMA`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz_hint: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retain_every: Option<usize>,
    /// Also write every iterate's gain to `gains.csv`.
    #[serde(default)]
    pub save_iterates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MismatchConfig {
    pub q_hat: Rows,
    pub r_hat: Rows,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    /// Defaults to the all-ones vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval_steps: Option<usize>,
    /// Initial attack policy; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k0: Option<Rows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualConfig {
    /// State weight; falls back to the objective's Q, then to I.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Rows>,
    pub m: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_bar: Option<Rows>,
    /// `N̄ = scale·N*`, used when `n_bar` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_bar_scale: Option<f64>,
    /// Regularizer on `L`; falls back to the top-level gamma.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<GammaConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Explicit closed loops. When absent the loops are derived from the
    /// plant and the deception gain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub systems: Option<Vec<NamedSystem>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedSystem {
    pub name: String,
    pub a_cl: Rows,
}

pub fn parse_config(text: &str) -> Result<RunConfig, Failure> {
    let cfg: RunConfig =
        serde_json::from_str(text).map_err(|e| Failure::input(format!("config: {e}")))?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(Failure::input(format!(
            "unsupported schema_version {}, expected {SCHEMA_VERSION}",
            cfg.schema_version
        )));
    }
    Ok(cfg)
}

pub fn to_matrix(rows: &Rows, name: &str) -> Result<Matrix, Failure> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(Failure::input(format!("{name} is empty")));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != cols) {
        return Err(Failure::input(format!(
            "{name}: row {} has {} entries, row 1 has {cols}",
            i + 1,
            rows[i].len()
        )));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Failure::input(format!("{name} has non-finite entries")));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn from_matrix(m: &Matrix) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn sym_pos_def(rows: &Rows, name: &str) -> Result<SymPosDef, Failure> {
    SymPosDef::new(to_matrix(rows, name)?).map_err(|e| Failure::input(format!("{name}: {e}")))
}

fn expect_shape(m: &Matrix, shape: (usize, usize), name: &str) -> Result<(), Failure> {
    if m.shape() != shape {
        return Err(Failure::input(format!(
            "{name} is {}x{}, expected {}x{}",
            m.nrows(),
            m.ncols(),
            shape.0,
            shape.1
        )));
    }
    Ok(())
}

/// `zero`, `deep` (σ = 100) or `deep:SIGMA`.
pub fn parse_init(text: &str) -> Result<InitMode, String> {
    match text.trim() {
        "zero" => Ok(InitMode::Zero),
        "deep" => Ok(InitMode::DeepStabilize { sigma: 100.0 }),
        other => {
            let sigma = other
                .strip_prefix("deep:")
                .ok_or_else(|| format!("init must be zero, deep or deep:SIGMA, got {other:?}"))?;
            let sigma: f64 = sigma
                .parse()
                .map_err(|_| format!("bad deep-stabilize shift {sigma:?}"))?;
            Ok(InitMode::DeepStabilize { sigma })
        }
    }
}

pub fn gamma_matrix(gamma: &GammaConfig, dim: usize, name: &str) -> Result<SymPosDef, Failure> {
    match gamma {
        GammaConfig::Scalar(g) if *g == 0.0 => Ok(SymPosDef::scaled_identity(dim, GAMMA_FLOOR)),
        GammaConfig::Scalar(g) if *g > 0.0 && g.is_finite() => {
            Ok(SymPosDef::scaled_identity(dim, *g))
        }
        GammaConfig::Scalar(g) => Err(Failure::input(format!(
            "{name} must be non-negative, got {g}"
        ))),
        GammaConfig::Matrix(rows) => {
            let g = sym_pos_def(rows, name)?;
            if g.dim() != dim {
                return Err(Failure::input(format!("{name} must be {dim}x{dim}")));
            }
            Ok(g)
        }
    }
}

/// Solver settings after command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct SolverOverrides {
    pub omega: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub init: Option<InitMode>,
}

impl RunConfig {
    pub fn plant(&self) -> Result<Plant, Failure> {
        let p = self
            .plant
            .as_ref()
            .ok_or_else(|| Failure::input("config has no plant"))?;
        Ok(Plant::new(
            to_matrix(&p.a, "plant.a")?,
            to_matrix(&p.b_u, "plant.b_u")?,
            to_matrix(&p.b_a, "plant.b_a")?,
        )?)
    }

    pub fn objective(&self, plant: &Plant) -> Result<AdversaryObjective, Failure> {
        let o = self
            .objective
            .as_ref()
            .ok_or_else(|| Failure::input("config has no objective"))?;
        let q = sym_pos_def(&o.q, "objective.q")?;
        let r = sym_pos_def(&o.r, "objective.r")?;
        expect_shape(q.matrix(), (plant.n(), plant.n()), "objective.q")?;
        expect_shape(r.matrix(), (plant.m_a(), plant.m_a()), "objective.r")?;
        Ok(AdversaryObjective::new(q, r))
    }

    pub fn has_gamma(&self) -> bool {
        self.gamma.is_some()
    }

    pub fn problem(&self) -> Result<DeceptionProblem, Failure> {
        let plant = self.plant()?;
        let objective = self.objective(&plant)?;
        let k_bar = match &self.k_bar {
            Some(rows) => {
                let k = to_matrix(rows, "k_bar")?;
                expect_shape(&k, (plant.m_a(), plant.n()), "k_bar")?;
                k
            }
            None => Matrix::zeros(plant.m_a(), plant.n()),
        };
        let gamma = self
            .gamma
            .as_ref()
            .ok_or_else(|| Failure::input("config has no gamma"))?;
        let gamma = gamma_matrix(gamma, plant.m_u(), "gamma")?;
        Ok(DeceptionProblem::new(plant, objective, k_bar, gamma)?)
    }

    pub fn lambda(&self, plant: &Plant) -> Result<Option<Matrix>, Failure> {
        self.lambda
            .as_ref()
            .map(|rows| {
                let l = to_matrix(rows, "lambda")?;
                expect_shape(&l, (plant.m_u(), plant.n()), "lambda")?;
                Ok(l)
            })
            .transpose()
    }

    pub fn bsor_config(&self, overrides: &SolverOverrides) -> Result<BsorConfig, Failure> {
        let s = self.solver.clone().unwrap_or_default();
        let mut cfg = BsorConfig::default();
        if let Some(init) = &s.init {
            cfg.init = parse_init(init).map_err(Failure::input)?;
        }
        cfg.omega = overrides.omega.or(s.omega).unwrap_or(cfg.omega);
        cfg.tol = overrides.tol.or(s.tol).unwrap_or(cfg.tol);
        cfg.max_iter = overrides.max_iter.or(s.max_iter).unwrap_or(cfg.max_iter);
        cfg.init = overrides.init.unwrap_or(cfg.init);
        cfg.lipschitz_hint = s.lipschitz_hint;
        cfg.retain_every = s.retain_every.unwrap_or(cfg.retain_every);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save_iterates(&self) -> bool {
        self.solver.as_ref().is_some_and(|s| s.save_iterates)
    }

    pub fn mismatch(&self, plant: &Plant) -> Result<(SymPosDef, SymPosDef), Failure> {
        let m = self
            .mismatch
            .as_ref()
            .ok_or_else(|| Failure::input("config has no mismatch section"))?;
        let q_hat = sym_pos_def(&m.q_hat, "mismatch.q_hat")?;
        let r_hat = sym_pos_def(&m.r_hat, "mismatch.r_hat")?;
        expect_shape(q_hat.matrix(), (plant.n(), plant.n()), "mismatch.q_hat")?;
        expect_shape(r_hat.matrix(), (plant.m_a(), plant.m_a()), "mismatch.r_hat")?;
        Ok((q_hat, r_hat))
    }

    pub fn simulation(&self) -> SimulationConfig {
        self.simulation.clone().unwrap_or_default()
    }

    pub fn k0(&self, plant: &Plant) -> Result<Matrix, Failure> {
        match self.simulation.as_ref().and_then(|s| s.k0.as_ref()) {
            Some(rows) => {
                let k = to_matrix(rows, "simulation.k0")?;
                expect_shape(&k, (plant.m_a(), plant.n()), "simulation.k0")?;
                Ok(k)
            }
            None => Ok(Matrix::zeros(plant.m_a(), plant.n())),
        }
    }

    pub fn dual_weights(&self, plant: &Plant) -> Result<DualWeights, Failure> {
        let d = self
            .dual
            .as_ref()
            .ok_or_else(|| Failure::input("config has no dual section"))?;
        let q = match (&d.q, &self.objective) {
            (Some(q), _) => sym_pos_def(q, "dual.q")?,
            (None, Some(o)) => sym_pos_def(&o.q, "objective.q")?,
            (None, None) => SymPosDef::scaled_identity(plant.n(), 1.0),
        };
        expect_shape(q.matrix(), (plant.n(), plant.n()), "dual.q")?;
        let m = sym_pos_def(&d.m, "dual.m")?;
        expect_shape(m.matrix(), (plant.m_u(), plant.m_u()), "dual.m")?;
        let gamma = d
            .gamma
            .as_ref()
            .or(self.gamma.as_ref())
            .ok_or_else(|| Failure::input("config has no gamma for the dual problem"))?;
        let gamma = gamma_matrix(gamma, plant.m_a(), "dual.gamma")?;
        let n_bar = match &d.n_bar {
            Some(rows) => {
                let nb = to_matrix(rows, "dual.n_bar")?;
                expect_shape(&nb, (plant.m_u(), plant.n()), "dual.n_bar")?;
                NBar::Given(nb)
            }
            None => NBar::Scaled(d.n_bar_scale.unwrap_or(0.0)),
        };
        Ok(DualWeights { q, m, gamma, n_bar })
    }

    /// Initial state for the energy metric.
    pub fn energy_x0(&self, n: usize) -> Result<Vec<f64>, Failure> {
        let x0 = self
            .energy
            .as_ref()
            .and_then(|e| e.x0.clone())
            .or_else(|| self.simulation.as_ref().and_then(|s| s.x0.clone()))
            .unwrap_or_else(|| vec![1.0; n]);
        if x0.len() != n || x0.iter().any(|v| !v.is_finite()) {
            return Err(Failure::input(format!("x0 must hold {n} finite entries")));
        }
        Ok(x0)
    }
}

pub struct DualWeights {
    pub q: SymPosDef,
    pub m: SymPosDef,
    pub gamma: SymPosDef,
    pub n_bar: NBar,
}

pub enum NBar {
    Given(Matrix),
    /// Multiple of the nominal controller.
    Scaled(f64),
}
