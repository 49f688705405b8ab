use std::path::Path;
use std::sync::Arc;

use stochastic_volterra::config::{ExperimentConfig, RawConfig};
use stochastic_volterra::harness::{build_solver, run, RunOptions, Subcommand};
use stochastic_volterra::mild::PicardOptions;
use stochastic_volterra::noise::{ito_second_moment, ItoRule, MarginalSampler};
use stochastic_volterra::regularity::Observations;

fn small(preset: &str, sets: &[&str]) -> ExperimentConfig {
    let mut raw = RawConfig::load(Path::new(preset)).unwrap();
    for s in sets {
        raw.set(s).unwrap();
    }
    ExperimentConfig::from_raw(&raw).unwrap()
}

#[test]
fn every_preset_parses() {
    for name in ["riesz-demo", "finite-history-demo", "laplace-example-demo", "white-noise-demo"] {
        let cfg = small(name, &[]);
        assert!(cfg.problem.rho > 1.0 && cfg.problem.rho < 2.0, "{name}");
    }
}

#[test]
fn solved_paths_and_exact_law_agree_in_second_moment() {
    // F = 0 with additive noise: stepped paths and exact-law draws must share
    // E‖u(T)‖² with the discrete Itô value.
    let cfg = small(
        "white-noise-demo",
        &["discretization.modes=8", "discretization.steps=256", "noise.covariance=\"power\"", "noise.gamma=1.0"],
    );
    let solver = build_solver(&cfg).unwrap();
    let n = 256;
    let g = vec![1.0; 8];
    let exact = ito_second_moment(&solver.bank, &solver.problem.cov, &g, ItoRule::LeftPoint, n).unwrap();

    let ens = solver.ensemble_solve(3, 4000, PicardOptions::default()).unwrap();
    let stepped = Observations::from_ensemble(&ens, &[n]);
    let sampler = MarginalSampler::new(&solver.bank, &solver.problem.cov, &g, &[n], ItoRule::LeftPoint).unwrap();
    let drawn = Observations::from_sampler(Arc::clone(&solver.problem.basis), solver.grid(), &sampler, 3, 4000);
    for obs in [&stepped, &drawn] {
        let v: Vec<f64> = (0..obs.n_paths()).map(|p| obs.norm_sq(p, 0, 0.0)).collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0) / v.len() as f64).sqrt();
        assert!((m - exact).abs() < 4.0 * sd, "{m} vs {exact} (sd {sd})");
    }
}

#[test]
fn simulate_writes_statistics_and_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(
        "riesz-demo",
        &["discretization.modes=8", "discretization.steps=64", "noise.paths=4"],
    );
    cfg.output.dir = dir.path().to_path_buf();
    let out = run(Subcommand::Simulate, &cfg, &RunOptions { timestamp: false }).unwrap();
    let names: Vec<String> = out
        .files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    for f in ["ensemble_stats.csv", "ensemble_stats.dat", "certificates.json"] {
        assert!(names.iter().any(|n| n == f), "{f} missing from {names:?}");
    }
    let ratio = out.summary.iter().find(|r| r.quantity == "picard_ratio_max").unwrap();
    assert!(ratio.pass && ratio.measured < 0.9);
    let header = std::fs::read_to_string(dir.path().join("ensemble_stats.csv")).unwrap();
    assert!(header.lines().next().unwrap().contains(','));
}
