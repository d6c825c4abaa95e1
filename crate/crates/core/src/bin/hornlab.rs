use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::Parser;
use hornlab::run::{execute, Command, Invocation};

/// Radial modes, frequency functionals and caloric series on the metric horn.
#[derive(Parser, Debug)]
#[command(name = "hornlab", version)]
struct Cli {
    #[arg(value_parser = PossibleValuesParser::new(Command::ALL.map(Command::name)))]
    command: String,

    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,

    /// Output directory; overrides `output` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Override a configuration leaf by dotted path, e.g. `mode.mu=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let inv = Invocation {
        command: cli.command.parse().expect("restricted to known commands by the parser"),
        config: cli.config,
        out: cli.out,
        overrides: cli.set,
    };
    let manifest = execute(&inv);
    match &manifest.error {
        Some(e) => eprintln!("hornlab {}: {} at stage {}: {e}", manifest.command, status_word(manifest.exit_code), manifest.stage),
        None => eprintln!("hornlab {}: ok ({:.2} s)", manifest.command, manifest.wall_time_s),
    }
    ExitCode::from(manifest.exit_code as u8)
}

fn status_word(code: i32) -> &'static str {
    match code {
        2 => "configuration error",
        3 => "numerical failure",
        4 => "bound check failed",
        _ => "failed",
    }
}
