use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tr_core::cli::{self, ScenarioConfig};

#[derive(Parser)]
#[command(name = "tr", version, about = "Time-rescaled shortcuts for quantum control protocols")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a rescaling function against the four STA requirements.
    Validate {
        #[arg(long, default_value = "sin")]
        family: String,
        #[arg(long)]
        a: f64,
        #[arg(long = "tf")]
        t_f: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Run a scenario: reference and rescaled propagation plus report.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a scenario once per contraction parameter and write sweep.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "a", value_delimiter = ',', required = true)]
        a_values: Vec<f64>,
    },
    /// Write the scenario's waveform tables only.
    Schedules {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(args: Args) -> tr_core::Result<bool> {
    match args.command {
        Command::Validate { family, a, t_f, tol } => {
            let (text, ok) = cli::validate_command(&family, a, t_f, tol)?;
            print!("{text}");
            Ok(ok)
        }
        Command::Run { config } => {
            let cfg = ScenarioConfig::load(&config)?;
            let run = cli::run_scenario(&cfg)?;
            for check in &run.checks {
                println!(
                    "{:<28} {:>12.4e}  (limit {:.1e})  {}",
                    check.name,
                    check.value,
                    check.threshold,
                    if check.passed { "PASS" } else { "FAIL" }
                );
            }
            println!("report written to {}", cfg.effective_output_dir().join("report.json").display());
            Ok(run.passed)
        }
        Command::Sweep { config, a_values } => {
            let cfg = ScenarioConfig::load(&config)?;
            let rows = cli::sweep(&cfg, &a_values)?;
            let dir = cfg.effective_output_dir();
            std::fs::create_dir_all(&dir)?;
            let csv = cli::sweep_csv(&cfg, &rows);
            std::fs::write(dir.join("sweep.csv"), &csv)?;
            print!("{csv}");
            Ok(rows.iter().all(|r| r.run.as_ref().is_some_and(|run| run.passed)))
        }
        Command::Schedules { config } => {
            let cfg = ScenarioConfig::load(&config)?;
            for path in cli::write_tables(&cfg, &cfg.effective_output_dir())? {
                println!("{}", path.display());
            }
            Ok(true)
        }
    }
}
