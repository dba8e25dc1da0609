//! `chemostat` command-line front end.
//!
//! Exit codes: 0 success, 1 input error, 2 marginal or boundary case,
//! 3 property failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use anyhow::{bail, Context};
use chemostat::equilibria::ParamGrid;
use chemostat::{fixtures, ChemostatModel, State};
use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;
mod verify;

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_MARGINAL: i32 = 2;
pub const EXIT_PROPERTY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "chemostat", version, about = "Chemostat with neighbour mutation: equilibria, expansions, simulation")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fixture {
    Fig1,
    Fig2,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON model file; overrides --fixture.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Built-in model used when no --model is given.
    #[arg(long, global = true, value_enum)]
    pub fixture: Option<Fixture>,
    /// Override the model's mutation rate.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Override the model's dilution rate.
    #[arg(long, global = true)]
    pub u: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Integrator local error tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Integration horizon; adaptive when omitted.
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    /// Parameter grid `emin:emax:n,umin:umax:n`.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Also write a gnuplot script next to the CSV files.
    #[arg(long, global = true)]
    pub gnuplot: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify the steady states and write equilibrium.csv.
    Steady,
    /// Critical dilution rate over the grid's eps axis (uc_curve.csv).
    Uc,
    /// Two-strain equilibrium curves over eps in [0, 2].
    Fig1,
    /// Twenty-strain trajectory, error norm and final profile.
    Fig2,
    /// Integrate one trajectory, or a seeded ensemble.
    Simulate {
        /// Initial state `x_1,...,x_n,s`; random from --seed when omitted.
        #[arg(long, allow_hyphen_values = true)]
        initial: Option<String>,
        /// Number of ensemble members; writes ensemble.csv instead of a trajectory.
        #[arg(long)]
        ensemble: Option<usize>,
    },
    /// Regime atlas over an (eps, u) grid.
    Sweep {
        /// Ensemble size for the empirical global-convergence flag (0 disables).
        #[arg(long, default_value_t = 0)]
        ensemble: usize,
    },
    /// First-order small-mutation expansion with its finite-difference check.
    Expand,
    /// Run the property battery.
    Verify {
        /// Force the named property's tolerance to -1 (harness self-test).
        #[arg(long)]
        corrupt_tolerance: Option<String>,
    },
}

impl Common {
    /// Model from `--model`, else `--fixture`, else `default`, with overrides applied.
    pub fn resolve_model(&self, default: Fixture) -> anyhow::Result<ChemostatModel> {
        let mut model = match &self.model {
            Some(path) => ChemostatModel::load(path).with_context(|| format!("loading model {}", path.display()))?,
            None => match self.fixture.unwrap_or(default) {
                Fixture::Fig1 => fixtures::fig1_model(1.0, 0.2),
                Fixture::Fig2 => fixtures::fig2_model(),
            },
        };
        if let Some(eps) = self.epsilon {
            model = model.with_epsilon(eps)?;
        }
        if let Some(u) = self.u {
            model = model.with_u(u)?;
        }
        Ok(model)
    }

    pub fn tol_or(&self, default: f64) -> anyhow::Result<f64> {
        let tol = self.tol.unwrap_or(default);
        if !(tol > 0.0 && tol.is_finite()) {
            bail!("--tol must be positive, got {tol}");
        }
        Ok(tol)
    }

    pub fn horizon(&self) -> anyhow::Result<Option<f64>> {
        match self.horizon {
            Some(h) if !(h > 0.0 && h.is_finite()) => bail!("--horizon must be positive, got {h}"),
            h => Ok(h),
        }
    }

    pub fn grid_or(&self, default: &str) -> anyhow::Result<ParamGrid> {
        Ok(ParamGrid::parse(self.grid.as_deref().unwrap_or(default))?)
    }
}

/// Parses `x_1,...,x_n,s`.
pub fn parse_initial(text: &str, n: usize) -> anyhow::Result<State> {
    let values: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad number `{v}` in --initial")))
        .collect::<anyhow::Result<_>>()?;
    if values.len() != n + 1 {
        bail!("--initial needs {} values (x_1..x_{n}, s), got {}", n + 1, values.len());
    }
    let s = values[n];
    Ok(State::new(values[..n].to_vec(), s)?)
}

/// Result of a successful command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    Marginal,
    PropertyFailure,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Success => EXIT_SUCCESS,
            Status::Marginal => EXIT_MARGINAL,
            Status::PropertyFailure => EXIT_PROPERTY,
        }
    }
}

pub fn run(cli: &Cli) -> anyhow::Result<Status> {
    let c = &cli.common;
    match &cli.command {
        Command::Steady => commands::steady(c),
        Command::Uc => commands::uc(c),
        Command::Fig1 => commands::fig1(c),
        Command::Fig2 => commands::fig2(c),
        Command::Simulate { initial, ensemble } => commands::simulate(c, initial.as_deref(), *ensemble),
        Command::Sweep { ensemble } => commands::sweep(c, *ensemble),
        Command::Expand => commands::expand(c),
        Command::Verify { corrupt_tolerance } => verify::run(c, corrupt_tolerance.as_deref()),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_SUCCESS };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INPUT
        }
    }
}
