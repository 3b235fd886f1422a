//! entlab: exact checks for entropy inequalities of Gibbs measures.
//!
//! Exit codes: 0 all asserted slacks pass, 1 an assertion failed,
//! 2 usage or validation error, 3 capacity exceeded.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use entlab::inequalities::InequalityKind;
use entlab::Error;
use entlab_cli::commands;
use entlab_cli::report::{OutputFormat, Table};
use entlab_cli::schema::parse_model;

#[derive(Parser)]
#[command(
    name = "entlab",
    version,
    about = "Exact numerical checks for entropy tensorization, heat-bath dynamics, and \
             weak-dependence coefficients of Gibbs measures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    At,
    P,
    Ls,
    Mls,
}

impl From<KindArg> for InequalityKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::At => InequalityKind::At,
            KindArg::P => InequalityKind::Poincare,
            KindArg::Ls => InequalityKind::LogSobolev,
            KindArg::Mls => InequalityKind::ModifiedLogSobolev,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Model description file (TOML).
    #[arg(long)]
    model: PathBuf,
    /// Base seed; trial t uses the stream (seed, t).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative tolerance for asserted slacks.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Weak-dependence coefficients and derived scalars.
    Coeffs {
        #[command(flatten)]
        common: Common,
    },
    /// The three tensorization constants and their applicability.
    Constant {
        #[command(flatten)]
        common: Common,
    },
    /// Slack sweep for one inequality at a claimed constant.
    Check {
        #[command(flatten)]
        common: Common,
        /// Inequality family.
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Claimed constant.
        #[arg(long = "C")]
        claimed_c: f64,
        /// Number of random test densities.
        #[arg(long, default_value_t = 100)]
        budget: usize,
    },
    /// Entropy decay along the heat-bath flow against exp(-t/C).
    Decay {
        #[command(flatten)]
        common: Common,
        /// Constant for the envelope; defaults to the best certified one.
        #[arg(long = "C")]
        claimed_c: Option<f64>,
        /// Largest time on the grid; defaults to 5C.
        #[arg(long)]
        tmax: Option<f64>,
        /// Number of grid points.
        #[arg(long, default_value_t = 50)]
        grid: usize,
        /// Number of random densities.
        #[arg(long, default_value_t = 10)]
        budget: usize,
    },
    /// Lower bounds on optimal constants (all four families when --kind is
    /// omitted, with the implication-ordering audit).
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        /// Number of optimizer restarts.
        #[arg(long, default_value_t = 6)]
        budget: usize,
    },
    /// Cover checks: block-entropy estimates, duals, decomposition, and
    /// Shannon identities.
    Shearer {
        #[command(flatten)]
        common: Common,
        /// Named cover from the model file; defaults to every declared
        /// cover, or the singleton cover when none are declared.
        #[arg(long)]
        cover: Option<String>,
        /// Number of random test densities per cover.
        #[arg(long, default_value_t = 50)]
        budget: usize,
    },
    /// Pointwise proof-block sweeps (logarithmic mean, gradient bounds,
    /// covariance estimate).
    Prooflab {
        #[command(flatten)]
        common: Common,
        /// Number of random test densities for the sweeps.
        #[arg(long, default_value_t = 3)]
        budget: usize,
    },
}

fn run(cli: Cli) -> entlab::Result<(Table, OutputFormat, bool)> {
    let (common, outcome) = match &cli.command {
        Command::Coeffs { common } => {
            let parsed = parse_model(&common.model)?;
            (common, commands::cmd_coeffs(&parsed)?)
        }
        Command::Constant { common } => {
            let parsed = parse_model(&common.model)?;
            (common, commands::cmd_constant(&parsed)?)
        }
        Command::Check {
            common,
            kind,
            claimed_c,
            budget,
        } => {
            let parsed = parse_model(&common.model)?;
            (
                common,
                commands::cmd_check(
                    &parsed,
                    (*kind).into(),
                    *claimed_c,
                    *budget,
                    common.seed,
                    common.tol,
                )?,
            )
        }
        Command::Decay {
            common,
            claimed_c,
            tmax,
            grid,
            budget,
        } => {
            let parsed = parse_model(&common.model)?;
            (
                common,
                commands::cmd_decay(
                    &parsed,
                    *claimed_c,
                    *tmax,
                    *grid,
                    *budget,
                    common.seed,
                    common.tol,
                )?,
            )
        }
        Command::Optimize {
            common,
            kind,
            budget,
        } => {
            let parsed = parse_model(&common.model)?;
            (
                common,
                commands::cmd_optimize(&parsed, kind.map(Into::into), *budget, common.seed)?,
            )
        }
        Command::Shearer {
            common,
            cover,
            budget,
        } => {
            let parsed = parse_model(&common.model)?;
            (
                common,
                commands::cmd_shearer(&parsed, cover.as_deref(), *budget, common.seed, common.tol)?,
            )
        }
        Command::Prooflab { common, budget } => {
            let parsed = parse_model(&common.model)?;
            (
                common,
                commands::cmd_prooflab(&parsed, *budget, common.seed, common.tol)?,
            )
        }
    };
    let format = match common.format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::JsonLines,
    };
    Ok((outcome.0, format, outcome.1))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((table, format, passed)) => {
            let mut stdout = std::io::stdout().lock();
            if table.write(format, &mut stdout).is_err() {
                return ExitCode::from(2);
            }
            if passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("assertion failure: at least one slack fell below -tol * scale");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Capacity { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
