use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use stochastic_volterra::config::{ExperimentConfig, RawConfig};
use stochastic_volterra::harness::{run, HarnessError, RunOptions, Subcommand};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    CertifyKernel,
    ScalarResolvent,
    Smoothing,
    Simulate,
    Holder,
    FullReport,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::CertifyKernel => Subcommand::CertifyKernel,
            Command::ScalarResolvent => Subcommand::ScalarResolvent,
            Command::Smoothing => Subcommand::Smoothing,
            Command::Simulate => Subcommand::Simulate,
            Command::Holder => Subcommand::Holder,
            Command::FullReport => Subcommand::FullReport,
        }
    }
}

/// Stochastic Volterra numerical lab.
#[derive(Debug, Parser)]
#[command(name = "svl", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Config file, or a preset name (riesz-demo, finite-history-demo,
    /// laplace-example-demo, white-noise-demo).
    #[arg(long, default_value = "riesz-demo")]
    config: PathBuf,
    /// Override one entry, `section.key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Master seed; replaces noise.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; replaces output.dir.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Omit the timestamp line from CSV and data files.
    #[arg(long)]
    no_timestamp: bool,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut raw = RawConfig::load(&cli.config)?;
    for s in &cli.set {
        raw.set(s)?;
    }
    if let Some(seed) = cli.seed {
        raw.set(&format!("noise.seed={seed}"))?;
    }
    let mut cfg = ExperimentConfig::from_raw(&raw)?;
    if let Some(dir) = &cli.output {
        cfg.output.dir = dir.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("warning: {e}");
        }
    }
    let result = load(&cli).and_then(|cfg| {
        run(
            cli.command.into(),
            &cfg,
            &RunOptions {
                timestamp: !cli.no_timestamp,
            },
        )
    });
    match result {
        Ok(out) => {
            for r in &out.summary {
                println!("{:<40} measured {:>12.6} predicted {:>12.6}  {}", r.quantity, r.measured, r.predicted, if r.pass { "ok" } else { "FAIL" });
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
