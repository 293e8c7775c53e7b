use std::path::PathBuf;

use bcrs_core::{Coupling, Mode};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "bcrs",
    version,
    about = "Ground-state equilibria of the BC-type Ruijsenaars-Schneider systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Zeros of the Askey-Wilson (trig) or Wilson (rational) polynomial
    Zeros(Common),
    /// Locate the zeros and run every equilibrium check on them
    Verify(VerifyArgs),
    /// Multi-start minimization of the Hamiltonian, compared with the zeros
    Minimize(MinimizeArgs),
    /// Zeros, ground energy and Bethe residual along a range of one coupling
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    #[value(alias = "trigonometric")]
    Trig,
    Rational,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Trig => Mode::Trigonometric,
            ModeArg::Rational => Mode::Rational,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    G,
    G1,
    G2,
    G3,
    G4,
}

impl From<Axis> for Coupling {
    fn from(a: Axis) -> Self {
        match a {
            Axis::G => Coupling::G,
            Axis::G1 => Coupling::G1,
            Axis::G2 => Coupling::G2,
            Axis::G3 => Coupling::G3,
            Axis::G4 => Coupling::G4,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// Number of particles (degree of the polynomial)
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub g: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub g1: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub g2: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub g3: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub g4: f64,
    /// Output format; `sweep` defaults to csv, everything else to json
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write to this file (atomically) instead of standard output
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Tolerance of the normalized Bethe residual
    #[arg(long, default_value_t = 1e-10)]
    pub tol_bethe: f64,
    /// Tolerance of the difference-equation residual
    #[arg(long, default_value_t = 1e-9)]
    pub tol_diffeq: f64,
    /// Rational mode: compare against the zeros rescaled from g = 1
    #[arg(long)]
    pub check_rescale: bool,
    /// Interaction coupling used by --check-rescale
    #[arg(long, default_value_t = 2.0, requires = "check_rescale")]
    pub rescale_g: f64,
}

#[derive(Debug, Clone, Args)]
pub struct MinimizeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    pub starts: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub sweep_axis: Axis,
    #[arg(long, allow_negative_numbers = true)]
    pub sweep_from: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub sweep_to: f64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub sweep_steps: u64,
}
