use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use polyred_cli::suites::table;
use polyred_cli::CliError;

#[derive(Parser)]
#[command(name = "polyred", version, about = "Reduced brackets, dynamics and reconstruction for the shipped scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and write CSV, diagnostics and manifest.
    Run { config: PathBuf },
    /// Run a verification suite and print a pass/fail table.
    Check {
        suite: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Describe a scenario and print its reference config.
    Describe { scenario: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => polyred_cli::run(&config).and_then(|report| {
            print!("{}", table(&report.checks));
            if let Some(v) = &report.verdict {
                println!("verdict: {v}");
            }
            println!("wrote {}, {}, {}", report.csv.display(), report.diagnostics.display(), report.manifest.display());
            match report.failures() {
                0 => Ok(()),
                failed => Err(CliError::Bounds { failed, total: report.checks.len() }),
            }
        }),
        Command::Check { suite, seed, samples } => polyred_cli::check(&suite, seed, samples).and_then(|rows| {
            print!("{}", table(&rows));
            match rows.iter().filter(|r| !r.pass).count() {
                0 => Ok(()),
                failed => Err(CliError::Bounds { failed, total: rows.len() }),
            }
        }),
        Command::Describe { scenario } => polyred_cli::describe(&scenario).map(|text| print!("{text}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("polyred: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
