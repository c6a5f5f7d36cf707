use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Heat-semigroup diagnostics for degenerate divergence-form operators.
#[derive(Parser)]
#[command(name = "degenlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a builtin scenario by name.
    Run {
        scenario: String,
        /// Output directory (default: the scenario's `output`, else out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Dotted-path override, e.g. `mesh.n=2048` or `checks.0.t=0.5`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List the builtin scenarios.
    List {
        #[arg(long, default_value = "text", value_parser = ["text", "json"])]
        format: String,
    },
    /// Print a builtin scenario as JSON.
    Show { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, out, threads, overrides } => {
            degenlab::cli::run(&scenario, out.as_deref(), threads, &overrides)
        }
        Command::List { format } => degenlab::cli::list(&format).map(|s| emit(&s)),
        Command::Show { name } => match degenlab::cli::builtin(&name) {
            Some(s) => s.to_json().map(|j| emit(&format!("{j}\n"))),
            None => Err(degenlab::error::LabError::Argument(format!("no builtin scenario named `{name}`"))),
        },
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) -> i32 {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
    0
}
