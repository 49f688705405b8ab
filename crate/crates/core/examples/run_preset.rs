//! Runs one harness subcommand on a preset through the library and prints
//! the measured-versus-predicted rows.
//!
//! cargo run --release --example run_preset -- certify-kernel laplace-example-demo

use std::path::Path;

use stochastic_volterra::config::{ExperimentConfig, RawConfig};
use stochastic_volterra::harness::{run, RunOptions, Subcommand};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let cmd = args.next().unwrap_or_else(|| "certify-kernel".into());
    let preset = args.next().unwrap_or_else(|| "riesz-demo".into());
    let cmd = Subcommand::from_name(&cmd).ok_or("unknown subcommand")?;
    let mut raw = RawConfig::load(Path::new(&preset))?;
    raw.set(&format!("output.dir=\"{}\"", std::env::temp_dir().join("svl-example").display()))?;
    let cfg = ExperimentConfig::from_raw(&raw)?;
    let outcome = run(cmd, &cfg, &RunOptions { timestamp: false })?;
    for r in &outcome.summary {
        println!("{:<36} {:>12.5} {:>12.5}  {}", r.quantity, r.measured, r.predicted, if r.pass { "ok" } else { "FAIL" });
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
