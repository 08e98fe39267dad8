//! Run a configured experiment from code and print its checks.
//!
//! `cargo run --release --example run_experiment -- laplace-z`

use cwsc::experiments::{self, ExperimentConfig};

fn main() -> cwsc::Result<()> {
    let kind = std::env::args().nth(1).unwrap_or_else(|| "large-deviation".into());
    let config = ExperimentConfig::from_toml_str(&format!("kind = \"{kind}\"\nbase_seed = 1\n"))?;
    let root = std::env::temp_dir().join("cwsc-example");
    let outcome = experiments::run(&config, &root)?;
    for c in &outcome.artifacts.checks {
        println!("{:<5} {:<36} {:.4e}", if c.pass { "ok" } else { "FAIL" }, c.name, c.value);
    }
    println!("files in {}", outcome.out_dir.display());
    Ok(())
}
