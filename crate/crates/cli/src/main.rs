//! `jacnet`: train, evaluate, invert and check Jacobian-field models.
//!
//! Exit codes: 0 on success, 1 for invalid input (config, files, flags),
//! 2 for numerical failures and exceeded check tolerances.

mod commands;
mod overrides;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jacnet_core::{JacError, Target};

use commands::{ModelArgs, ThresholdViolation};

#[derive(Parser)]
#[command(
    name = "jacnet",
    version,
    about = "Learn functions by learning their Jacobians"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a JSON experiment config; writes params.json, history.csv, meta.json.
    Train {
        config: PathBuf,
        /// Override a scalar config field, e.g. `--set lr=0.02` or `--set activation.k=2`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory (defaults to the config's output_dir, then runs/<config name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a trained model on a uniform grid; writes eval.csv.
    Eval {
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = -2.0, allow_negative_numbers = true)]
        lo: f64,
        #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
        hi: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Invert an spd model on a uniform grid of outputs; writes invert.csv.
    Invert {
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Defaults to exp(-1).
        #[arg(long, allow_negative_numbers = true)]
        lo: Option<f64>,
        /// Defaults to exp(1).
        #[arg(long, allow_negative_numbers = true)]
        hi: Option<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check path independence on reference fields (and optionally a learned 2-D field).
    Diagnose {
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare analytic gradients against central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        instances: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Exp,
    Abs,
}

#[derive(Args)]
struct ModelFlags {
    /// params.json produced by `train`.
    #[arg(long)]
    params: PathBuf,
    /// meta.json with the anchor and integrator (defaults to the one next to params).
    #[arg(long)]
    meta: Option<PathBuf>,
    #[arg(long, value_enum)]
    target: Option<TargetArg>,
    #[arg(long, allow_negative_numbers = true)]
    x0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    y0: Option<f64>,
    /// Integrator tolerance for evaluation.
    #[arg(long)]
    tol: Option<f64>,
}

impl From<ModelFlags> for ModelArgs {
    fn from(f: ModelFlags) -> Self {
        ModelArgs {
            params: f.params,
            meta: f.meta,
            target: f.target.map(|t| match t {
                TargetArg::Exp => Target::Exp,
                TargetArg::Abs => Target::Abs,
            }),
            x0: f.x0,
            y0: f.y0,
            tol: f.tol,
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ThresholdViolation>().is_some() {
        return 2;
    }
    match err.downcast_ref::<JacError>() {
        Some(e) if e.is_numerical() => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train {
            config,
            overrides,
            out,
        } => commands::train(&config, &overrides, out),
        Command::Eval {
            model,
            n,
            lo,
            hi,
            out,
        } => commands::eval(&model.into(), n, lo, hi, &out),
        Command::Invert {
            model,
            n,
            lo,
            hi,
            out,
        } => commands::invert(
            &model.into(),
            n,
            lo.unwrap_or((-1.0f64).exp()),
            hi.unwrap_or(1.0f64.exp()),
            &out,
        ),
        Command::Diagnose {
            params,
            pairs,
            seed,
        } => commands::diagnose(params.as_deref(), pairs, seed),
        Command::Gradcheck { seed, instances } => commands::gradcheck(seed, instances),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
