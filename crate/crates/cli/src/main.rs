use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use idmft_core::PenaltyFunctional;

mod commands;

/// Full-CI references and penalized 1RDM functional stress tests.
#[derive(Debug, Parser)]
#[command(name = "idmft", version)]
struct Cli {
    /// Write output files here instead of printing the main document.
    #[arg(long, global = true, env = "IDMFT_OUT_DIR")]
    out_dir: Option<PathBuf>,

    /// Convergence tolerance of the i-DMFT minimizer (gradient norm).
    #[arg(long, global = true, default_value_t = 1e-6)]
    tolerance: f64,

    /// Starting points of the multi-start minimizer.
    #[arg(long, global = true, default_value_t = 5)]
    starts: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact ground state: energy, natural occupations, entropy, cumulant energy.
    Fci {
        #[command(flatten)]
        input: Input,
    },
    /// FCI (and optionally i-DMFT) along a series of geometries.
    Scan {
        /// FCIDUMP files; R is read from a `_R<value>` suffix, else the position.
        files: Vec<PathBuf>,
        #[command(flatten)]
        model: DimerSeries,
        #[command(flatten)]
        functional: OptionalFunctional,
    },
    /// Fit (kappa, b) so the functional is exact at two anchors.
    Fit {
        #[arg(long, requires = "diss", conflicts_with = "model")]
        eq: Option<PathBuf>,
        #[arg(long, requires = "eq", conflicts_with = "model")]
        diss: Option<PathBuf>,
        /// Reference energy at the equilibrium anchor (default: computed by FCI).
        #[arg(long, allow_hyphen_values = true)]
        e_eq: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        e_diss: Option<f64>,
        /// Hubbard dimer anchors instead of files.
        #[arg(long, value_parser = ["dimer"], requires_all = ["t_eq", "t_diss", "u"])]
        model: Option<String>,
        #[arg(long)]
        t_eq: Option<f64>,
        #[arg(long)]
        t_diss: Option<f64>,
        #[arg(long = "U", id = "u")]
        u: Option<f64>,
        #[arg(long, default_value = "ph_entropy", value_parser = parse_penalty)]
        penalty: PenaltyFunctional,
        #[arg(long, default_value_t = 10.0)]
        kappa_max: f64,
    },
    /// Minimize the functional at fixed (kappa, b).
    Idmft {
        #[command(flatten)]
        input: Input,
        #[arg(long, allow_hyphen_values = true)]
        kappa: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, default_value = "ph_entropy", value_parser = parse_penalty)]
        penalty: PenaltyFunctional,
    },
    /// Linearity, single-valuedness and 1RDM error of a saved scan.
    Analyze {
        /// JSON written by `scan`.
        scan: PathBuf,
        #[arg(long)]
        eps_s: Option<f64>,
        #[arg(long)]
        eps_e: Option<f64>,
    },
    /// Schur-convexity verdict and small-occupation exponent of a penalty.
    Schur {
        #[arg(long, value_parser = parse_penalty)]
        penalty: PenaltyFunctional,
        /// Vector length of the sampled occupations.
        #[arg(long, default_value_t = 6)]
        m: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// One FCIDUMP file or a Hubbard dimer.
#[derive(Debug, Args)]
struct Input {
    #[arg(required_unless_present = "model", conflicts_with = "model")]
    file: Option<PathBuf>,
    #[arg(long, value_parser = ["dimer"], requires_all = ["t", "u"])]
    model: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long = "U", id = "u")]
    u: Option<f64>,
}

#[derive(Debug, Args)]
struct DimerSeries {
    #[arg(long, value_parser = ["dimer"], requires_all = ["t_list", "u"], conflicts_with = "files")]
    model: Option<String>,
    #[arg(long, value_delimiter = ',')]
    t_list: Option<Vec<f64>>,
    #[arg(long = "U", id = "u")]
    u: Option<f64>,
}

#[derive(Debug, Args)]
struct OptionalFunctional {
    /// Also minimize the functional at every geometry.
    #[arg(long, requires = "b", allow_hyphen_values = true)]
    kappa: Option<f64>,
    #[arg(long, requires = "kappa", allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long, default_value = "ph_entropy", value_parser = parse_penalty)]
    penalty: PenaltyFunctional,
}

fn parse_penalty(s: &str) -> Result<PenaltyFunctional, String> {
    s.parse().map_err(|e: idmft_core::Error| e.to_string())
}

/// Input-mode rules clap cannot express across flattened groups.
fn check_usage(cli: &Cli) {
    let missing = match &cli.command {
        Command::Scan { files, model, .. } => files.is_empty() && model.model.is_none(),
        Command::Fit { eq, model, .. } => eq.is_none() && model.is_none(),
        _ => false,
    };
    if missing {
        Cli::command()
            .error(
                ErrorKind::MissingRequiredArgument,
                "give FCIDUMP input files or --model dimer with its parameters",
            )
            .exit();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    check_usage(&cli);
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
