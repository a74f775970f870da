use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use robest::config::{Mode, RunConfig};
use robest::scenarios::preset_scenarios;
use robest::{checks, run, Error};

#[derive(Parser)]
#[command(name = "robest", version, about = "Parametric robustness of estimation error for LTI systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze the scenarios of a JSON config and write CSV/JSON/SVG artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Inspect the built-in scenario presets.
    Scenarios {
        #[arg(long)]
        list: bool,
        /// Write a config that runs every preset.
        #[arg(long, value_name = "PATH")]
        write_config: Option<PathBuf>,
    },
    /// Run the property suites on seeded populations.
    Check {
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn execute(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Run {
            config,
            out,
            mode,
            seed,
            dt,
        } => {
            let mut cfg = RunConfig::from_path(&config)?;
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            if let Some(mode) = mode {
                cfg.mode = mode;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if dt.is_some() {
                cfg.dt = dt;
            }
            cfg.validate()?;
            let summary = run::run(&cfg)?;
            let rows: Vec<_> = summary.rows().collect();
            let flagged = rows.iter().filter(|r| !r.is_ok()).count();
            println!(
                "{} scenarios, {} rows ({} flagged) written to {}",
                summary.results.len(),
                rows.len(),
                flagged,
                cfg.out_dir.display()
            );
            Ok(true)
        }
        Command::Scenarios { list, write_config } => {
            if list || write_config.is_none() {
                for s in preset_scenarios() {
                    let names: Vec<&str> = s
                        .params_of_interest
                        .iter()
                        .map(|&i| s.truth.spec().names()[i].as_str())
                        .collect();
                    println!("{:<22} params={:<16} N={}", s.name, names.join(","), s.horizon);
                }
            }
            if let Some(path) = write_config {
                std::fs::write(&path, serde_json::to_string_pretty(&RunConfig::presets_default())? + "\n")?;
                println!("wrote {}", path.display());
            }
            Ok(true)
        }
        Command::Check { count, seed } => {
            let outcomes = checks::run_checks(count, seed)?;
            for o in &outcomes {
                println!("[{}] {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
            }
            Ok(outcomes.iter().all(|o| o.passed))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
