use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cwsc::experiments::{self, ExperimentConfig, ExperimentKind};

/// Experiments on Curie-Weiss random matrix ensembles.
#[derive(Parser)]
#[command(name = "cwsc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `base_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output root; files go to <out>/<kind>/. Falls back to the
        /// config's output_dir, then $CWSC_OUT_DIR, then ./cwsc-out.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// List the experiment kinds a config may name.
    ListExperiments,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::ListExperiments => {
            for k in ExperimentKind::ALL {
                println!("{:<20} {}", k.name(), k.description());
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, seed, out, jobs } => {
            let mut cfg = match ExperimentConfig::from_path(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(e.exit_code() as u8);
                }
            };
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            let root = experiments::resolve_out_root(&cfg, out.as_deref());
            match experiments::run_with_jobs(&cfg, &root, jobs) {
                Ok(outcome) => {
                    for c in &outcome.artifacts.checks {
                        println!(
                            "{} {:<36} value={:.6e} threshold={:.6e}  {}",
                            if c.pass { "PASS" } else { "FAIL" },
                            c.name,
                            c.value,
                            c.threshold,
                            c.detail
                        );
                    }
                    println!("wrote {} files to {}", outcome.files.len(), outcome.out_dir.display());
                    if outcome.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
