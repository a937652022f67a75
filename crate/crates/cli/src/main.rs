use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wtan_cli::commands::{self, ensure_out_dir};
use wtan_cli::error::CliError;
use wtan_cli::{configure_threads, repro};

#[derive(Parser)]
#[command(
    name = "wtan",
    about = "Discrete optimal transport, extended tangent elements, parallel transport, curve translation, and mean-field control",
    version
)]
struct Cli {
    /// Seed for all sampled quantities
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory for artifacts
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also emit SVG line charts
    #[arg(long, global = true, default_value_t = false)]
    svg: bool,
    /// Worker threads (default: rayon's choice; WTAN_THREADS as fallback)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the atom-merge tolerance applied to measure inputs
    #[arg(long = "tol-merge", global = true)]
    tol_merge: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact optimal transport between two measures
    Ot {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
    },
    /// Fiberwise distance between two tangent elements over the same base
    TangentDist { a: PathBuf, b: PathBuf },
    /// Parallel transport of an element along a coupling
    Ptransport {
        element: PathBuf,
        coupling: PathBuf,
        /// enumerate all vertex-gluing transports up to this count
        #[arg(long)]
        enumerate: Option<usize>,
    },
    /// Translate a path ensemble along an initial coupling
    Translate { eta: PathBuf, gamma0: PathBuf },
    /// Transport-based comparison of two tangent elements
    CalcE { a: PathBuf, b: PathBuf },
    /// Joint-law distance between two tangent elements
    CalcD { a: PathBuf, b: PathBuf },
    /// Sampled Holder-seminorm estimates for a library functional
    Holder {
        #[arg(long, default_value = "linear-quadratic")]
        functional: String,
        /// reference measure for half-squared-w2
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 200)]
        budget: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
    },
    /// Trajectory-optimization value solve on a library control problem
    Control {
        #[arg(long, default_value = "split-target")]
        problem: String,
        /// initial measure (defaults to the problem's own)
        #[arg(long)]
        m0: Option<PathBuf>,
        #[arg(long, default_value = "randomized")]
        mode: String,
        #[arg(long, default_value_t = 8)]
        starts: usize,
        #[arg(long, default_value_t = 4)]
        branches: usize,
    },
    /// Regenerate a library example and compare against expected values
    Repro {
        /// one of the known example ids (see `repro --help`)
        id: String,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads(cli.threads);
    let out = ensure_out_dir(&cli.out);
    match cli.command {
        Command::Ot { a, b, p } => commands::cmd_ot(&a, &b, p, &out, cli.tol_merge),
        Command::TangentDist { a, b } => commands::cmd_tangent_dist(&a, &b, &out),
        Command::Ptransport { element, coupling, enumerate } => {
            commands::cmd_ptransport(&element, &coupling, enumerate, &out)
        }
        Command::Translate { eta, gamma0 } => commands::cmd_translate(&eta, &gamma0, &out, cli.svg),
        Command::CalcE { a, b } => commands::cmd_calc_e(&a, &b, &out),
        Command::CalcD { a, b } => commands::cmd_calc_d(&a, &b, &out),
        Command::Holder { functional, reference, alpha, budget, dim } => commands::cmd_holder(
            &functional,
            reference.as_deref(),
            alpha,
            budget,
            cli.seed,
            dim,
            &out,
            cli.svg,
        ),
        Command::Control { problem, m0, mode, starts, branches } => commands::cmd_control(
            &problem,
            m0.as_deref(),
            &mode,
            starts,
            branches,
            cli.seed,
            &out,
        ),
        Command::Repro { id } => {
            let report = repro::run_repro(&id, cli.seed, &out, cli.svg)?;
            if report.passed {
                println!("repro {id}: all {} checks passed", report.checks.len());
                Ok(())
            } else {
                let failing: Vec<&str> = report
                    .checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.name.as_str())
                    .collect();
                Err(CliError::Input(format!(
                    "repro {id}: failing checks: {}",
                    failing.join(", ")
                )))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
