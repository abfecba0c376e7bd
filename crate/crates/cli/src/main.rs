use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sion_cli::report::{emit_report, RunReport};
use sion_cli::selftest::{run_selftest, DEFAULT_SELFTEST_SEED};
use sion_cli::{load_config, oligopoly_config, run, Command, Format, Method, RunConfig, RunOptions};

/// Symmetric-in-group equilibria of two-group zero-sum games.
#[derive(Parser)]
#[command(name = "sion", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    seed: Option<u64>,
    /// Stream per-iteration residuals to standard error.
    #[arg(long)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve for the symmetric equilibrium and verify it.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Check a user-supplied symmetric point.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Group strategies as `s1,s2`.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        point: Option<[f64; 2]>,
    },
    /// Solve the built-in relative-profit oligopoly.
    Oligopoly {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10.0)]
        a: f64,
        #[arg(long, default_value_t = 0.5)]
        b: f64,
        #[arg(long = "cA", default_value_t = 2.0)]
        c_a: f64,
        #[arg(long = "cC", default_value_t = 1.0)]
        c_c: f64,
    },
    /// Run the built-in acceptance checks.
    Selftest {
        #[arg(long, default_value_t = DEFAULT_SELFTEST_SEED)]
        seed: u64,
    },
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [a, b] = parts.as_slice() else {
        return Err(format!("expected 's1,s2', got '{s}'"));
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    Ok([num(a)?, num(b)?])
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn emit(report: &RunReport, format: Format, out: Option<&PathBuf>) -> ExitCode {
    let path = out.map(|p| p.display().to_string());
    if let Err(e) = emit_report(report, format, path.as_deref()) {
        eprintln!("error: cannot write report: {e}");
        return exit(1);
    }
    for e in &report.errors {
        eprintln!("{e}");
    }
    exit(report.exit_code)
}

fn execute(command: Command, common: &Common, config: RunConfig, point: Option<[f64; 2]>) -> ExitCode {
    let mut config = config;
    if let Some(m) = common.method {
        config.solver.method = m;
    }
    if let Some(s) = common.seed {
        config.seed = s;
    }
    if let Some(f) = common.format {
        config.output.format = f;
    }
    if let Some(p) = &common.out {
        config.output.path = Some(p.display().to_string());
    }
    let format = config.output.format;
    let out = config.output.path.clone().map(PathBuf::from);
    let options = RunOptions {
        verbose: common.verbose,
        point,
    };
    let report = run(&config, command, &options);
    emit(&report, format, out.as_ref())
}

fn config_failure(command: Command, common: &Common, message: String) -> ExitCode {
    eprintln!("error: {message}");
    let mut report = RunReport::new(command.name());
    report.fail(message);
    emit(&report, common.format.unwrap_or(Format::Json), common.out.as_ref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match cli.command {
        Cmd::Solve { common } => match &common.config {
            Some(path) => match load_config(path) {
                Ok(c) => execute(Command::Solve, &common, c, None),
                Err(e) => config_failure(Command::Solve, &common, e.to_string()),
            },
            None => config_failure(Command::Solve, &common, "solve requires --config".into()),
        },
        Cmd::Verify { common, point } => match &common.config {
            Some(path) => match load_config(path) {
                Ok(c) => execute(Command::Verify, &common, c, point),
                Err(e) => config_failure(Command::Verify, &common, e.to_string()),
            },
            None => config_failure(Command::Verify, &common, "verify requires --config".into()),
        },
        Cmd::Oligopoly { common, a, b, c_a, c_c } => {
            if common.config.is_some() {
                return config_failure(
                    Command::Oligopoly,
                    &common,
                    "oligopoly takes its parameters from flags; use solve for config files".into(),
                );
            }
            match oligopoly_config(a, b, c_a, c_c) {
                Ok(c) => execute(Command::Oligopoly, &common, c, None),
                Err(e) => config_failure(Command::Oligopoly, &common, e.to_string()),
            }
        }
        Cmd::Selftest { seed } => {
            let mut stdout = std::io::stdout();
            match run_selftest(seed, &mut stdout) {
                Ok(outcomes) => {
                    let failed = outcomes.iter().filter(|o| !o.passed).count();
                    println!("{} of {} checks passed", outcomes.len() - failed, outcomes.len());
                    exit(if failed == 0 { 0 } else { 3 })
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit(1)
                }
            }
        }
    }
}
