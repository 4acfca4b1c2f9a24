use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::LevelFilter;

use xos_cli::commands::{self, PriceOptions};
use xos_cli::{exit, parse, CliError, Document, Format, Report};

/// Price equilibria for firms with cross-held equity and liabilities.
#[derive(Parser)]
#[command(name = "xos", version)]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Input {
    /// Scenario document, or `-` for standard input.
    file: String,
}

#[derive(Args)]
struct SolverFlags {
    /// ℓ¹ convergence threshold.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<u64>,
    /// Evaluate scenarios in parallel; output order is unchanged.
    #[arg(long)]
    parallel: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the document and report the bounds and liability class.
    Check(Input),
    /// Solve every scenario from the zero state.
    Solve {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Multi-start search for distinct equilibria.
    Scan {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        solver: SolverFlags,
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Leverage and cross-ownership measures at each equilibrium.
    Metrics {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Monte Carlo prices before maturity under the [market] model.
    Price {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        solver: SolverFlags,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Sum paths in a fixed order so output does not depend on thread count.
        #[arg(long)]
        reproducible: bool,
        /// Also write price-per-claim CSV to this path.
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
}

fn init_logging() {
    let level = match std::env::var("XOS_LOG").as_deref() {
        Err(_) | Ok("") | Ok("off") => LevelFilter::Off,
        Ok("info") => LevelFilter::Info,
        Ok("debug") => LevelFilter::Debug,
        Ok(other) => {
            eprintln!("warning: ignoring XOS_LOG={other}; expected off, info or debug");
            LevelFilter::Off
        }
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
}

fn read_document(path: &str) -> Result<Document, CliError> {
    let text = if path == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|source| CliError::Io { path: "<stdin>".into(), source })?;
        buf
    } else {
        std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.into(),
            source,
        })?
    };
    parse(&text)
}

fn run(cli: Cli) -> Result<(Report, u8), CliError> {
    let solver_config = |doc: &Document, flags: &SolverFlags, starts: Option<usize>, seed: Option<u64>| {
        let mut model = doc.build()?;
        let c = &mut model.solver;
        if let Some(tol) = flags.tol {
            c.tol = tol;
        }
        if let Some(max_iter) = flags.max_iter {
            c.max_iter = max_iter;
        }
        if let Some(starts) = starts {
            c.starts = starts;
        }
        if let Some(seed) = seed {
            c.seed = seed;
        }
        c.validate()?;
        let config = c.clone();
        Ok::<_, CliError>((model, config))
    };
    let ok = |report| Ok((report, exit::SUCCESS));
    match cli.command {
        Command::Check(input) => commands::check(&read_document(&input.file)?),
        Command::Solve { input, solver } => {
            let (model, config) = solver_config(&read_document(&input.file)?, &solver, None, None)?;
            ok(commands::solve(&model, &config, solver.parallel)?)
        }
        Command::Scan {
            input,
            solver,
            starts,
            seed,
        } => {
            let (model, config) = solver_config(&read_document(&input.file)?, &solver, starts, seed)?;
            ok(commands::scan(&model, &config, solver.parallel)?)
        }
        Command::Metrics { input, solver } => {
            let (model, config) = solver_config(&read_document(&input.file)?, &solver, None, None)?;
            ok(commands::metrics(&model, &config, solver.parallel)?)
        }
        Command::Price {
            input,
            solver,
            paths,
            seed,
            reproducible,
            plot_data,
        } => {
            let (model, config) = solver_config(&read_document(&input.file)?, &solver, None, seed)?;
            let options = PriceOptions {
                paths,
                reproducible,
                plot_data: plot_data.as_deref(),
            };
            ok(commands::price(&model, &config, &options)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    let format = cli.format;
    match run(cli) {
        Ok((report, code)) => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            if let Err(e) = report.render(format, &mut out).and_then(|_| out.flush().map_err(CliError::from)) {
                eprintln!("error: {e}");
                return ExitCode::from(exit::INVALID_INPUT);
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
