use clap::{Args, Parser, Subcommand};
use ksrg_cli::{config, run};
use std::path::PathBuf;
use std::process::ExitCode;

/// Sampler, exponent calculator, and Monte Carlo experiment driver for
/// kernel-based spatial random graphs.
#[derive(Parser)]
#[command(name = "ksrg", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Print the closed-form exponent report for the configured model as JSON
    Phase(CommonArgs),
    /// Sample one graph (at the first n_grid volume) and write vertices.txt + edges.txt
    Sample(CommonArgs),
    /// Run the configured Monte Carlo experiment; write results.csv, fit.json, meta.json
    Experiment(CommonArgs),
    /// Render results.csv (+ fit.json if present) in the output directory to plot.svg
    Plot(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to a key = value config file
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Trailing `--key value` pairs overriding config entries
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.cmd {
        Sub::Phase(a) => (run::Cmd::Phase, a),
        Sub::Sample(a) => (run::Cmd::Sample, a),
        Sub::Experiment(a) => (run::Cmd::Experiment, a),
        Sub::Plot(a) => (run::Cmd::Plot, a),
    };
    let overrides = match config::parse_override_args(&args.overrides) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run::execute(cmd, &args.config, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
