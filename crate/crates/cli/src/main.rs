use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use torsion_cli::{
    cmd_bounds, cmd_defects, cmd_solve, cmd_validate, parse_grid, parse_sweep, smallness_text,
    table1_text, CliResult, ProblemConfig,
};

/// Exact perturbative approximants for the perturbed torsion problem.
#[derive(Parser)]
#[command(name = "torsion", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the hierarchy and emit the exact state document.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the configured truncation order.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Check every symbolic identity of a run; nonzero exit on failure.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Emit defect CSV files: boundary curves, mu sweep, solution surface.
    Defects {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluation mu for the fixed-mu files.
        #[arg(long)]
        mu: Option<f64>,
        /// Grid as RxT, e.g. 256x512.
        #[arg(long)]
        grid: Option<String>,
        /// Log-spaced mu sweep as LO:HI:N.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Emit the quantitative bound report.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        mu: Option<f64>,
        /// Append the demo sequence table.
        #[arg(long)]
        table1: bool,
        /// Append accuracy rows for these mu values (e.g. e-2,e-4,e-8).
        #[arg(long)]
        smallness: Option<String>,
    },
    /// Print the demo sequence table.
    Table1 {
        /// Highest order to print.
        #[arg(long, default_value_t = 9)]
        k_max: usize,
    },
    /// Print accuracy rows (mu, exp(-(log(1/mu))^2)).
    Smallness {
        /// Comma-separated mu values; e-N means exp(-N).
        #[arg(long, default_value = "e-2,e-4,e-8,e-16")]
        mus: String,
    },
}

fn dispatch(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Solve { config, out, k } => {
            let cfg = ProblemConfig::load(&config)?;
            cmd_solve(&cfg, out.as_deref(), k)
        }
        Command::Validate { config, k } => {
            let cfg = ProblemConfig::load(&config)?;
            cmd_validate(&cfg, k)
        }
        Command::Defects {
            config,
            out,
            mu,
            grid,
            sweep,
        } => {
            let cfg = ProblemConfig::load(&config)?;
            let grid = grid.as_deref().map(parse_grid).transpose()?;
            let sweep = sweep.as_deref().map(parse_sweep).transpose()?;
            cmd_defects(&cfg, out.as_deref(), mu, grid, sweep)
        }
        Command::Bounds {
            config,
            out,
            mu,
            table1,
            smallness,
        } => {
            let cfg = ProblemConfig::load(&config)?;
            cmd_bounds(&cfg, out.as_deref(), mu, table1, smallness.as_deref())
        }
        Command::Table1 { k_max } => Ok(table1_text(k_max)),
        Command::Smallness { mus } => smallness_text(&mus),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
