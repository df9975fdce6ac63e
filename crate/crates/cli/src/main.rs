use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spde_cli::config::{validate_config, ExperimentConfig, Kind};
use spde_cli::experiments::run_experiment;
use spde_cli::report::write_outputs;
use spde_cli::suite::verify_all;

#[derive(Parser)]
#[command(name = "spde", version, about = "Reproducible SPDE experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Run every experiment kind at its defaults plus the property suite.
    VerifyAll {
        /// Smaller sample sizes and horizons.
        #[arg(long)]
        quick: bool,
    },
    /// Print the default configuration of an experiment kind.
    PrintConfig { kind: String },
}

const CONFIG_ERROR: u8 = 2;

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("SPDE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("SPDE_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn status(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(path: &PathBuf) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let cfg = match validate_config(&text) {
        Ok(c) => c,
        Err(errors) => {
            for e in errors {
                eprintln!("error: {e}");
            }
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let bundle = match run_experiment(&cfg) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    print!("{}", bundle.to_text());
    if let Some(dir) = &cfg.output {
        if let Err(e) = write_outputs(&bundle, dir) {
            eprintln!("error: cannot write {}: {e}", dir.display());
            return ExitCode::from(CONFIG_ERROR);
        }
    }
    status(bundle.pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(CONFIG_ERROR);
    }
    match cli.command {
        Command::Run { config } => run(&config),
        Command::VerifyAll { quick } => match verify_all(quick) {
            Ok(bundles) => {
                for b in &bundles {
                    println!("== {}", b.kind);
                    print!("{}", b.to_text());
                }
                println!("== summary");
                for b in &bundles {
                    println!("{} {}", if b.pass() { "PASS" } else { "FAIL" }, b.kind);
                }
                status(bundles.iter().all(|b| b.pass()))
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(CONFIG_ERROR)
            }
        },
        Command::PrintConfig { kind } => match Kind::from_name(&kind) {
            Some(k) => {
                println!("# {k} defaults; every run needs an explicit seed");
                print!("{}", ExperimentConfig::defaults(k, 1).to_text());
                ExitCode::SUCCESS
            }
            None => {
                let names: Vec<_> = Kind::ALL.iter().map(|k| k.name()).collect();
                eprintln!("error: unknown kind `{kind}`; expected one of {}", names.join(", "));
                ExitCode::from(CONFIG_ERROR)
            }
        },
    }
}
