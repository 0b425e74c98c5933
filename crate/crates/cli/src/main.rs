//! # `transport`
//!
//! Command-line front end for the transport-equation solvers. Every
//! subcommand reads one JSON problem file and writes a JSON (or CSV) result
//! with a provenance header.
//!
//! Exit codes: 0 ok, 2 invalid input, 3 numeric failure, 4 unsolvable.

/// Problem-file schema and validation.
mod input;

/// Exit codes, provenance header and rendering.
mod output;

/// One function per subcommand.
mod commands;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Outcome, Settings};
use input::ProblemFile;
use output::{render, CliError, Format, Provenance};

#[derive(Parser)]
#[command(name = "transport", version, about = "Solve singular transport equations near a source")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Jet order for jet-space commands.
    #[arg(long, global = true)]
    order: Option<usize>,
    /// Upper bound on Re λ for `spectrum`.
    #[arg(long, global = true, allow_negative_numbers = true)]
    max_re: Option<f64>,
    /// Absolute resonance tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Relative tolerance of the flow integrator.
    #[arg(long, global = true)]
    rel_tol: Option<f64>,
    /// Integrand size at which flow integration stops.
    #[arg(long, global = true)]
    tail_tol: Option<f64>,
    /// Output format (default: csv for solve-grid, json otherwise).
    #[arg(long, global = true, value_enum)]
    output: Option<Format>,
    /// Omit the timestamp so identical runs give identical output.
    #[arg(long, global = true)]
    no_timestamp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues of D_X + A with Re λ ≤ --max-re and their multiplicities.
    Spectrum { file: PathBuf },
    /// Taylor solution to --order, with kernel and obstructions.
    SolveJet { file: PathBuf },
    /// Pointwise solution by the flow integral at the `grid` points.
    SolveGrid { file: PathBuf },
    /// Kernel of D_X + A − λ on polynomial jets.
    Kernel { file: PathBuf },
    /// Dual kernel as distributions supported at the source.
    DualKernel { file: PathBuf },
    /// Fredholm solvability of the right-hand side.
    Solvable { file: PathBuf },
    /// Matrix of D_X + A on jets of order --order.
    Matrix { file: PathBuf },
    /// Heat-kernel transport coefficients.
    Heat { file: PathBuf },
    /// WKB expansion of a one-dimensional potential well.
    Wkb { file: PathBuf },
    /// Sampled check of the perturbation bounds for a matrix path.
    VerifyEstimates { file: PathBuf },
    /// Resonances μ_j = α·μ (|α| ≥ 2) of the linearization.
    Sternberg { file: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum { .. } => "spectrum",
            Command::SolveJet { .. } => "solve-jet",
            Command::SolveGrid { .. } => "solve-grid",
            Command::Kernel { .. } => "kernel",
            Command::DualKernel { .. } => "dual-kernel",
            Command::Solvable { .. } => "solvable",
            Command::Matrix { .. } => "matrix",
            Command::Heat { .. } => "heat",
            Command::Wkb { .. } => "wkb",
            Command::VerifyEstimates { .. } => "verify-estimates",
            Command::Sternberg { .. } => "sternberg",
        }
    }

    fn file(&self) -> &PathBuf {
        match self {
            Command::Spectrum { file }
            | Command::SolveJet { file }
            | Command::SolveGrid { file }
            | Command::Kernel { file }
            | Command::DualKernel { file }
            | Command::Solvable { file }
            | Command::Matrix { file }
            | Command::Heat { file }
            | Command::Wkb { file }
            | Command::VerifyEstimates { file }
            | Command::Sternberg { file } => file,
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("TRANSPORT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::validation(format!("TRANSPORT_THREADS: expected a positive integer, found `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::validation(format!("TRANSPORT_THREADS: {e}")))
}

fn run(cli: &Cli) -> Result<(String, u8, Vec<String>), CliError> {
    configure_threads()?;
    let file = ProblemFile::read(cli.command.file())?;
    let g = &cli.global;
    let settings = Settings {
        order: g.order,
        max_re: g.max_re,
        tol: g.tol,
        rel_tol: g.rel_tol,
        tail_tol: g.tail_tol,
    };
    let Outcome { report, tolerances } = match &cli.command {
        Command::Spectrum { .. } => commands::spectrum(&file, &settings),
        Command::SolveJet { .. } => commands::solve_jet(&file, &settings),
        Command::SolveGrid { .. } => commands::solve_grid(&file, &settings),
        Command::Kernel { .. } => commands::kernel(&file, &settings),
        Command::DualKernel { .. } => commands::dual_kernel(&file, &settings),
        Command::Solvable { .. } => commands::solvable(&file, &settings),
        Command::Matrix { .. } => commands::matrix_export(&file, &settings),
        Command::Heat { .. } => commands::heat(&file, &settings),
        Command::Wkb { .. } => commands::wkb(&file, &settings),
        Command::VerifyEstimates { .. } => commands::verify_estimates(&file, &settings),
        Command::Sternberg { .. } => commands::sternberg(&file, &settings),
    }?;
    let prov = Provenance {
        command: cli.command.name(),
        field: file.field.to_string(),
        input_sha256: file.sha256.clone(),
        tolerances,
        timestamp: (!g.no_timestamp).then(|| chrono::Utc::now().to_rfc3339()),
    };
    let default = match cli.command {
        Command::SolveGrid { .. } => Format::Csv,
        _ => Format::Json,
    };
    let text = render(&prov, &report, g.output.unwrap_or(default))?;
    Ok((text, report.exit, report.notes))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((text, code, notes)) => {
            let mut out = std::io::stdout().lock();
            if out.write_all(text.as_bytes()).and_then(|_| out.flush()).is_err() {
                return ExitCode::from(output::EXIT_NUMERIC);
            }
            for n in notes {
                eprintln!("{n}");
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
