use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use brafl_cli::checks::{oracle_check, selftest};
use brafl_cli::{parse_config, run_experiment, sweep, CliError};

/// Robust-aggregation experiment driver.
#[derive(Parser)]
#[command(name = "brafl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one experiment from a config file.
    Run {
        config: PathBuf,
        /// Output directory (default: $BRAFL_OUT or ./brafl-out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the config once per malicious fraction and summarize.
    Sweep {
        config: PathBuf,
        /// Comma-separated malicious fractions, each below 0.5.
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify the subset-selection robustness certificate on random
    /// instances seeded from the config.
    OracleCheck { config: PathBuf },
    /// Run the built-in property suites.
    Selftest,
}

fn output_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("BRAFL_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("brafl-out"))
}

fn load_model(path: &PathBuf) -> Result<brafl_cli::ConfigModel, CliError> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn execute(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Run { config, out } => {
            let model = load_model(&config)?;
            let dir = output_dir(out);
            let (manifest, records) =
                run_experiment(&model, &config.display().to_string(), &dir)?;
            if let Some(last) = records.last() {
                let asr = last
                    .asr
                    .map(|v| format!(" asr {v:.4}"))
                    .unwrap_or_default();
                println!("final round {}: acc {:.4}{asr}", last.round, last.acc);
            }
            for (name, _) in &manifest.files {
                println!("wrote {}", dir.join(name).display());
            }
            println!("wrote {}", dir.join("manifest.txt").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            config,
            epsilons,
            out,
        } => {
            let model = load_model(&config)?;
            let dir = output_dir(out);
            let manifest = sweep(&model, &config.display().to_string(), &epsilons, &dir)?;
            for (name, _) in &manifest.files {
                println!("wrote {}", dir.join(name).display());
            }
            println!("wrote {}", dir.join("manifest.txt").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::OracleCheck { config } => {
            let model = load_model(&config)?;
            let report = oracle_check(model.seed, 200);
            println!(
                "oracle-check: {}/{} instances satisfied (worst ratio {:.6})",
                report.instances - report.violations,
                report.instances,
                report.worst_ratio
            );
            if report.violations > 0 {
                return Err(CliError::Config(format!(
                    "{} instances violated the robustness bound",
                    report.violations
                )));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest => {
            let results = selftest();
            let mut failed = 0;
            for result in &results {
                let status = if result.passed { "PASS" } else { "FAIL" };
                println!("selftest {} [{status}] {}", result.name, result.detail);
                if !result.passed {
                    failed += 1;
                }
            }
            if failed > 0 {
                return Err(CliError::Config(format!("{failed} selftest suites failed")));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
