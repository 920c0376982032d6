use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ko_radial::config::parse_config_with_overrides;
use ko_radial::pipeline::{run, Command, EXIT_CONFIG};

#[derive(Parser)]
#[command(
    name = "ko-radial",
    version,
    about = "Radial solutions of coupled semilinear elliptic systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override a key, e.g. `--set numerics.r_max=4`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Successive approximation, direct integration, classification and bound audits.
    Solve(Common),
    /// Integral profile and verdict only.
    Classify(Common),
    /// Growth envelope audit of the nonlinearity.
    CheckEnvelope(Common),
    /// Solve every cell of the `[sweep]` product.
    Sweep(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Classify(a) => (Command::Classify, a),
        Cmd::CheckEnvelope(a) => (Command::CheckEnvelope, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
    };
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let cfg = match parse_config_with_overrides(&text, &args.set) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    match run(&cfg, command) {
        Ok(out) => {
            if cfg.output.report_path.is_none() {
                print!("{}", out.report);
            }
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
