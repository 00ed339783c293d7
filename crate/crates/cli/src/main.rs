use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cellcov_cli::compare::compare;
use cellcov_cli::pipeline::{run_scenario, RunOverrides};
use cellcov_cli::scenario::{load_text, Mode, ScenarioFile, BUNDLED};
use cellcov_cli::{CliError, THREADS_ENV};

#[derive(Parser)]
#[command(name = "cellcov", version, about = "Coverage probability and rate of Poisson cellular networks")]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or a bundled scenario by name).
    Run {
        scenario: String,
        /// analytic, mc or both; overrides the file.
        #[arg(long)]
        mode: Option<String>,
        /// Simulation seed; overrides the file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides the file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default from CELLCOV_THREADS, else all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Write rates in bits/s/Hz instead of nats/s/Hz.
        #[arg(long)]
        bits: bool,
    },
    /// Compare the coverage columns of two CSV files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        tol: f64,
    },
    /// List the bundled scenarios.
    ListScenarios,
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Validation(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            scenario,
            mode,
            seed,
            out,
            threads: flag,
            bits,
        } => {
            if let Some(n) = threads(flag)? {
                if n == 0 {
                    return Err(CliError::Validation("thread count must be >= 1".into()));
                }
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| CliError::Validation(format!("cannot start thread pool: {e}")))?;
            }
            let text = load_text(&scenario)?;
            let resolved = ScenarioFile::parse(&text)
                .and_then(|f| f.resolve())
                .map_err(|e| CliError::Validation(format!("{scenario}: {e}")))?;
            let overrides = RunOverrides {
                mode: mode.as_deref().map(Mode::parse).transpose()?,
                seed,
                out,
                bits,
            };
            let art = run_scenario(resolved, &overrides)?;
            println!("wrote {}", art.coverage_csv.display());
            if let Some(r) = &art.rate_csv {
                println!("wrote {}", r.display());
            }
            println!("wrote {}", art.meta_json.display());
            println!("wrote {}", art.plot_script.display());
            if art.flagged_rows > 0 {
                return Err(CliError::Numerical(format!(
                    "{} rows are flagged in the status column",
                    art.flagged_rows
                )));
            }
            Ok(())
        }
        Command::Compare { a, b, tol } => {
            let report = compare(&a, &b, tol)?;
            print!("{}", report.render());
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::Comparison(format!(
                    "max difference {:.3e} exceeds {:.3e}",
                    report.max_diff, tol
                )))
            }
        }
        Command::ListScenarios => {
            for (name, text) in BUNDLED {
                let summary = text
                    .lines()
                    .next()
                    .and_then(|l| l.strip_prefix('#'))
                    .map(str::trim)
                    .unwrap_or("");
                println!("{name:<16} {summary}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
