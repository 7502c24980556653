//! `stabcert`: spectral constants, stabilization certificates, feedback
//! laws and falsification probes from the command line.
//!
//! Every command writes `<out>/<command>.json` (a result document) plus
//! optional CSV side files. Exit codes: 0 success, 1 the mathematics said
//! no (violation found, hypothesis failed, set not thick), 2 usage or
//! configuration error.

mod commands;
mod output;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "stabcert", version, about = "Stabilization certificates for parabolic equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimum cube density of a set (thickness) and ball densities (weak thickness).
    CheckThick {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        options: CheckThickOptions,
    },
    /// Best spectral-inequality constants C(k) and a growth fit.
    SpectralConstant {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        operator: OperatorArgs,
        #[command(flatten)]
        options: SpectralOptions,
    },
    /// Weak-observability certificate (T, alpha, C), end to end or from given constants.
    Certify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        operator: OperatorArgs,
        #[command(flatten)]
        options: CertifyOptions,
    },
    /// Damping or finite-rank feedback for the operator on the set.
    FeedbackBuild {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        operator: OperatorArgs,
        #[command(flatten)]
        options: FeedbackOptions,
    },
    /// Closed-loop simulation and decay-rate fit.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        operator: OperatorArgs,
        #[command(flatten)]
        options: SimulateOptions,
    },
    /// Tests a claimed (C, T, alpha) against heat-kernel or ground-state probes.
    Probe {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        operator: OperatorArgs,
        #[command(flatten)]
        options: ProbeOptions,
    },
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Grid, e.g. `dim=1,R=10,m=512,periodic=true`.
    #[arg(long)]
    domain: Option<String>,
    /// Set fixture, e.g. `slabs:period=1,fill=0.25`, `half:axis=0`, `box:lower=0,upper=10`, `file:set.json`.
    #[arg(long, default_value = "full")]
    set: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum OperatorKind {
    Frac,
    Hermite,
    Schrodinger,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum ConditionArg {
    #[value(name = "I")]
    I,
    #[value(name = "II")]
    II,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct OperatorArgs {
    #[arg(long, value_enum, default_value = "frac")]
    operator: OperatorKind,
    /// Fractional order of `(-Δ)^{s/2}`.
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    /// Shift `c`.
    #[arg(long, default_value_t = 0.0)]
    c: f64,
    /// `harmonic:c=4` or a grid-function JSON file.
    #[arg(long)]
    potential: Option<String>,
    #[arg(long, value_enum, default_value = "II")]
    condition: ConditionArg,
    /// Form bound of Condition I.
    #[arg(long)]
    delta: Option<f64>,
    /// Stencil half-width of the finite-difference kinds.
    #[arg(long, default_value_t = 4)]
    stencil: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct CheckThickOptions {
    /// Cube side lengths to test (multiples of the grid step).
    #[arg(long = "side", default_values_t = [1.0])]
    sides: Vec<f64>,
    /// Ascending ball radii for the weak-thickness densities.
    #[arg(long = "radius")]
    radii: Vec<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModelArg {
    /// `ln C = c1 k^a`.
    Exp,
    /// `ln C = α k ln k + β k`.
    Klogk,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SpectralOptions {
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    #[arg(long, value_enum, default_value = "exp")]
    model: ModelArg,
    /// Exponent `a` of the exp model; defaults to `1/s` (fractional) or 2.
    #[arg(long)]
    a: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct CertifyOptions {
    #[arg(long, default_value_t = 12)]
    k_max: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 500)]
    recurrence_trials: usize,
    #[arg(long, default_value_t = 8)]
    tau_count: usize,
    #[arg(long, default_value_t = 1.1)]
    safety: f64,
    /// Skip the fit: `c1,a,c2,b,M,delta0`.
    #[arg(long)]
    constants: Option<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum FeedbackKind {
    Damping,
    FiniteRank,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct FeedbackOptions {
    #[arg(long, value_enum, default_value = "finite-rank")]
    kind: FeedbackKind,
    /// `δ` of the damping rate `min{(1-δ)N² - 2, ½e^{-2 c1 N}}`.
    #[arg(long, default_value_t = 0.0)]
    damping_delta: f64,
    /// Largest `N` in the damping sweep.
    #[arg(long, default_value_t = 8)]
    n_max: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SimulateOptions {
    #[arg(long, value_enum, default_value = "finite-rank")]
    kind: FeedbackKind,
    #[arg(long, default_value_t = 10.0)]
    t_end: f64,
    /// Time step; defaults to `min(t_end/100, 0.1/‖K‖)`.
    #[arg(long)]
    dt: Option<f64>,
    /// Number of trajectories.
    #[arg(long, default_value_t = 1)]
    trajectories: usize,
    /// `random` or `mode:j` (0-based eigenfunction index).
    #[arg(long, default_value = "random")]
    initial: String,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct ProbeOptions {
    /// Claim JSON `{"C": .., "T": .., "alpha": ..}`; overrides the flags below.
    #[arg(long)]
    claim: Option<PathBuf>,
    #[arg(long = "claim-c")]
    claim_c: Option<f64>,
    #[arg(long = "claim-t")]
    claim_t: Option<f64>,
    #[arg(long = "claim-alpha")]
    claim_alpha: Option<f64>,
    /// Probe centres, `0,5,-3` in 1D or `0;0,5;1` in 2D (fractional kind).
    #[arg(long, default_value = "0")]
    centers: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
