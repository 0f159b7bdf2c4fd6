use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use vacuum_ns_cli::{execute, parse_config, Mode, Options, Status};

/// Spherically symmetric Navier-Stokes flow with a vacuum free boundary.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// INI configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the `mode` key of the configuration.
    #[arg(long, value_parser = clap::value_parser!(ModeArg))]
    mode: Option<ModeArg>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Snapshot file to audit; overrides `[output] snapshots`.
    #[arg(long)]
    snapshots: Option<PathBuf>,
    /// Suppress the progress summary on stdout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum ModeArg {
    Run,
    Converge,
    Perturb,
    Audit,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Run => Mode::Run,
            ModeArg::Converge => Mode::Converge,
            ModeArg::Perturb => Mode::Perturb,
            ModeArg::Audit => Mode::Audit,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                Status::Failure.code()
            } else {
                0
            });
        }
    };
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.config.display());
            return ExitCode::from(Status::Failure.code());
        }
    };
    let mut spec = match parse_config(&text, cli.mode.map(Mode::from)) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(Status::Failure.code());
        }
    };
    if let Some(path) = cli.snapshots {
        spec.snapshots = Some(path);
    }
    let opts = Options {
        out_dir: cli.out.unwrap_or_else(|| spec.output_dir.clone()),
        quiet: cli.quiet,
    };
    match execute(&spec, &opts) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Status::Failure.code())
        }
    }
}
