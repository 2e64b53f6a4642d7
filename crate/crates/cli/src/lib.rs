//! Command-line front-end for `lqdeceive`.
//!
//! Every subcommand reads one JSON config, writes `report.json` plus any CSV
//! artifacts to the output directory, and exits with a code that identifies
//! the failure class:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success (including a solver that hit its iteration cap) |
//! | 1 | malformed or inconsistent input |
//! | 2 | no stabilizing Riccati solution |
//! | 3 | infeasible start or domain exit in the deception solver |
//! | 4 | anything else (learner failure, numerical breakdown, I/O) |

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;

use lqdeceive::adversary::LearnerError;
use lqdeceive::deception::{DeceptionError, InitMode};
use lqdeceive::matsolve::SolveError;

use config::{parse_config, parse_init, RunConfig, SolverOverrides};
use report::{RunReport, Status};

#[derive(Debug, Parser)]
#[command(
    name = "lqdeceive",
    version,
    about = "Deception design against learning LQ adversaries"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; the report goes to stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub omega: Option<f64>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter", global = true)]
    pub max_iter: Option<usize>,
    /// zero | deep | deep:SIGMA
    #[arg(long, global = true, value_parser = parse_init)]
    pub init: Option<InitMode>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Nominal optimal attack and its closed-loop spectrum.
    SolveAttack,
    /// Design the deception gain with BSOR.
    DesignDeception,
    /// Run the adversary learners on the spoofed plant.
    SimulateLearner,
    /// Poisoning design against a minimizing LQR learner.
    Dual,
    /// Deception quality under mismatched adversary weights.
    Robustness,
    /// State energy of closed loops.
    Energy,
    /// Emit a seeded random instance.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "m-u")]
    pub m_u: Option<usize>,
    #[arg(long = "m-a")]
    pub m_a: Option<usize>,
    /// Draw `B_a = B_u·E`.
    #[arg(long = "range-mode")]
    pub range_mode: bool,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SolveAttack => "solve-attack",
            Command::DesignDeception => "design-deception",
            Command::SimulateLearner => "simulate-learner",
            Command::Dual => "dual",
            Command::Robustness => "robustness",
            Command::Energy => "energy",
            Command::Generate(_) => "generate",
        }
    }
}

/// A failed run: the status it maps to and a message for the report.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub status: Status,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            status: Status::InputError,
            message: message.into(),
        }
    }
}

fn solve_status(e: &SolveError) -> Status {
    match e {
        SolveError::NotHurwitzInput { .. }
        | SolveError::NonSymmetricInput { .. }
        | SolveError::NotPositiveDefinite
        | SolveError::DimensionMismatch(_)
        | SolveError::NonFinite(_) => Status::InputError,
        SolveError::NoStabilizingSolution { .. } | SolveError::NotStabilizable => {
            Status::NoStabilizingSolution
        }
        SolveError::NotHurwitz { .. } | SolveError::EigenFailure => Status::Error,
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        Self {
            status: solve_status(&e),
            message: e.to_string(),
        }
    }
}

impl From<DeceptionError> for Failure {
    fn from(e: DeceptionError) -> Self {
        let status = match &e {
            DeceptionError::Solve(s) => solve_status(s),
            DeceptionError::NoStabilizingSolution { .. }
            | DeceptionError::SpoofedPlantUnstable { .. }
            | DeceptionError::OutOfDomain { .. }
            | DeceptionError::NominalAttackMissing => Status::NoStabilizingSolution,
            DeceptionError::ShiftTooSmall { .. } | DeceptionError::InfeasibleStart { .. } => {
                Status::InfeasibleStart
            }
            DeceptionError::DomainExit { .. } => Status::DomainExit,
            DeceptionError::InvalidConfig(_) | DeceptionError::DimensionMismatch(_) => {
                Status::InputError
            }
            DeceptionError::NotControllable => Status::Error,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl From<LearnerError> for Failure {
    fn from(e: LearnerError) -> Self {
        let status = match &e {
            LearnerError::Solve(s) => solve_status(s),
            LearnerError::InvalidSpec(_) | LearnerError::DimensionMismatch(_) => Status::InputError,
            _ => Status::LearnerFailed,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

/// What a successful command produced.
pub struct Output {
    pub report: RunReport,
    /// `(file name, contents)` written next to the report.
    pub files: Vec<(String, String)>,
    /// File printed to stdout when no output directory is given.
    pub primary: Option<String>,
}

impl Output {
    pub fn report(report: RunReport) -> Self {
        Self {
            report,
            files: Vec::new(),
            primary: None,
        }
    }
}

fn load_config(cli: &Cli) -> Result<Option<RunConfig>, Failure> {
    let Some(path) = &cli.config else {
        return Ok(None);
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map(Some)
}

fn dispatch(cli: &Cli, cfg: Option<&RunConfig>) -> Result<Output, Failure> {
    let overrides = SolverOverrides {
        omega: cli.omega,
        tol: cli.tol,
        max_iter: cli.max_iter,
        init: cli.init,
    };
    if let Command::Generate(args) = &cli.command {
        return commands::generate(cfg, args, cli.seed);
    }
    let cfg = cfg.ok_or_else(|| Failure::input("--config is required"))?;
    match &cli.command {
        Command::SolveAttack => commands::solve_attack(cfg),
        Command::DesignDeception => commands::design_deception(cfg, &overrides),
        Command::SimulateLearner => commands::simulate_learner(cfg, &overrides, cli.seed),
        Command::Dual => commands::dual(cfg, &overrides),
        Command::Robustness => commands::robustness(cfg, &overrides),
        Command::Energy => commands::energy(cfg, &overrides),
        Command::Generate(_) => unreachable!(),
    }
}

pub fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types always serialize");
    s.push('\n');
    s
}

fn write_all(dir: &Path, output: &Output) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), to_json(&output.report))?;
    for (name, contents) in &output.files {
        fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let command = cli.command.name();
    let started = Instant::now();
    let cfg = load_config(&cli);
    let out_dir = cli.out.clone().or_else(|| {
        cfg.as_ref()
            .ok()
            .and_then(|c| c.as_ref())
            .and_then(|c| c.out.clone())
    });
    let output = cfg
        .and_then(|cfg| dispatch(&cli, cfg.as_ref()))
        .unwrap_or_else(|f| {
            let mut report = RunReport::new(command, f.status);
            report.error = Some(f.message);
            report.seed = cli.seed;
            Output::report(report)
        });
    info!("{command} finished in {:.3?}", started.elapsed());

    let code = output.report.status.exit_code();
    match out_dir {
        Some(dir) => {
            if let Err(e) = write_all(&dir, &output) {
                eprintln!("error: writing to {}: {e}", dir.display());
                return 4;
            }
        }
        None => {
            let primary = output
                .primary
                .as_ref()
                .and_then(|name| output.files.iter().find(|(n, _)| n == name));
            match primary {
                Some((_, contents)) => print!("{contents}"),
                None => print!("{}", to_json(&output.report)),
            }
        }
    }
    if let Some(msg) = &output.report.error {
        eprintln!("error: {msg}");
    }
    code
}
