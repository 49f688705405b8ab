//! Acceptance criteria 1–10. Runs without the libtest harness so that every
//! criterion prints its verdict line; exits non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use stochastic_volterra::config::{ExperimentConfig, RawConfig};
use stochastic_volterra::grid::TimeGrid;
use stochastic_volterra::harness::smoothing_reports;
use stochastic_volterra::kernel::{check_growth_conditions, sector_angle, ContourSampling, GrowthOptions, KernelSpec, LaplaceKernel};
use stochastic_volterra::mild::{FMap, GMap, PicardOptions, ProblemSpec, ScalarFn, SolutionPath, Solver};
use stochastic_volterra::mittag_leffler::mittag_leffler;
use stochastic_volterra::noise::{
    ito_second_moment, sample_increments, stochastic_convolution_at, CovarianceSpec, ItoRule, MarginalSampler,
};
use stochastic_volterra::regularity::{
    holder_fit, kappa, kappa_h_grid, kappa_integrals, kappa_integrals_quadrature, kappa_slopes, max_bound,
    predicted_exponent, HolderDesign, MaxBoundStability, Observations,
};
use stochastic_volterra::resolvent::{solve_scalar, verify_scalar_estimates};
use stochastic_volterra::spectral::{BankOptions, ResolventBank, SpectralBasis, SpectralField};

type Outcome = Result<Vec<String>, Box<dyn std::error::Error>>;

/// Collects `(ok, message)` lines of one criterion.
#[derive(Default)]
struct Checks {
    lines: Vec<String>,
    failed: bool,
}

impl Checks {
    fn check(&mut self, ok: bool, msg: String) {
        self.failed |= !ok;
        self.lines.push(format!("{} {msg}", if ok { "ok  " } else { "FAIL" }));
    }

    fn finish(self) -> Outcome {
        if self.failed {
            Err(self.lines.join("\n    ").into())
        } else {
            Ok(self.lines)
        }
    }
}

fn criterion_1() -> Outcome {
    let mut c = Checks::default();
    let kernel = KernelSpec::LaplaceDefined(LaplaceKernel::reference_example());
    let candidates: Vec<f64> = (0..=10).map(|i| 1.35 + 0.01 * f64::from(i)).collect();
    let growth = check_growth_conditions(&kernel, &candidates, &GrowthOptions::default())?;
    let boundary = growth.boundary().ok_or("no candidate passed")?;
    c.check((boundary - 1.4).abs() <= 0.05, format!("growth boundary {boundary:.3} vs 1.4 ± 0.05"));
    let sector = sector_angle(&kernel, &ContourSampling::default())?;
    c.check(
        (sector.rho_sector - 1.874).abs() <= 0.01,
        format!("rho_sector {:.4} vs 1.874 ± 0.01", sector.rho_sector),
    );
    c.finish()
}

fn ml_error(rho: f64, mu: f64, steps: usize) -> Result<f64, Box<dyn std::error::Error>> {
    let grid = TimeGrid::uniform(2.0, steps)?;
    let table = solve_scalar(&KernelSpec::riesz(rho), mu, &grid)?;
    let mut err: f64 = 0.0;
    for (t, s) in table.t().iter().zip(&table.s) {
        err = err.max((s - mittag_leffler(rho, -mu * t.powf(rho))?).abs());
    }
    Ok(err)
}

fn criterion_2() -> Outcome {
    let mut c = Checks::default();
    for rho in [1.2, 1.5, 1.8] {
        for mu in [1.0, 10.0, 100.0] {
            let fine = ml_error(rho, mu, 4096)?;
            let order = (ml_error(rho, mu, 2048)? / fine).log2();
            c.check(
                fine <= 1e-4 && order >= 1.8,
                format!("rho {rho} mu {mu}: error {fine:.2e}, order {order:.2}"),
            );
        }
    }
    c.finish()
}

fn criterion_3() -> Outcome {
    let mut c = Checks::default();
    let cases = [
        (KernelSpec::riesz(1.5), vec![1.0, 10.0, 100.0, 1000.0], TimeGrid::graded(15.0, 4096, 2.0)?, 0.05),
        (KernelSpec::FiniteHistory { rho: 1.5 }, vec![3e3, 3e4, 3e5, 3e6], TimeGrid::graded(0.05, 4096, 2.0)?, 0.1),
    ];
    for (kernel, mus, grid, tol) in &cases {
        let report = verify_scalar_estimates(kernel, mus, grid)?;
        for s in &report.slopes {
            c.check(
                (s.slope - s.target).abs() <= *tol,
                format!("{} {}: slope {:+.4} vs {:+.4} ± {tol}", report.kernel, s.name, s.slope, s.target),
            );
        }
        c.check(
            report.max_abs_s <= 1.0 + 1e-6,
            format!("{} sup|s| = {:.8}", report.kernel, report.max_abs_s),
        );
    }
    c.finish()
}

fn criterion_4() -> Outcome {
    let mut c = Checks::default();
    let cfg = ExperimentConfig::from_raw(&RawConfig::load(Path::new("riesz-demo"))?)?;
    assert_eq!(cfg.smoothing.modes, 256);
    for r in smoothing_reports(&cfg)? {
        c.check(
            r.within(0.1),
            format!("{} s = {:.4}: slope {:+.4} vs {:+.4} ± 0.1", r.quantity.label(), r.s, r.slope, r.target),
        );
    }
    c.finish()
}

fn criterion_5() -> Outcome {
    let mut c = Checks::default();
    let (modes, steps, n_paths) = (64, 512, 10_000);
    let basis = Arc::new(SpectralBasis::new(modes));
    let grid = Arc::new(TimeGrid::uniform(1.0, steps)?);
    // The identity is exact for the discrete scheme, coarse modes included.
    let opts = BankOptions { derivatives: false, strict: false };
    let bank = ResolventBank::build(&KernelSpec::riesz(1.5), Arc::clone(&basis), Arc::clone(&grid), opts)?;
    let g = vec![1.0; modes];
    for cov in [CovarianceSpec::PowerDiagonal { gamma: 1.0 }, CovarianceSpec::White] {
        let exact = ito_second_moment(&bank, &cov, &g, ItoRule::LeftPoint, steps)?;
        let mut sq = Vec::with_capacity(n_paths);
        for p in 0..n_paths as u64 {
            let noise = sample_increments(&cov, &basis, Arc::clone(&grid), 5, p, modes)?;
            let w = stochastic_convolution_at(&bank, &noise, &g, ItoRule::LeftPoint, steps)?;
            sq.push(w.iter().map(|x| x * x).sum::<f64>());
        }
        let n = n_paths as f64;
        let mean = sq.iter().sum::<f64>() / n;
        let sigma = (sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        let z = (mean - exact) / sigma;
        c.check(z.abs() <= 4.0, format!("{cov:?}: MC {mean:.6} exact {exact:.6} ({z:+.2} sigma)"));
    }
    c.finish()
}

fn criterion_6() -> Outcome {
    let mut c = Checks::default();
    let (rho, modes) = (1.5, 64);
    let basis = Arc::new(SpectralBasis::new(modes));
    let problem = ProblemSpec {
        kernel: KernelSpec::riesz(rho),
        basis: Arc::clone(&basis),
        cov: CovarianceSpec::PowerDiagonal { gamma: 1.0 },
        f: FMap::Nemytskii { func: ScalarFn::Sin, lipschitz: 1.0 },
        g: GMap::NemytskiiMultiplicative { func: ScalarFn::Sin, lipschitz: 1.0 },
        u0: SpectralField::unit(Arc::clone(&basis), 1),
        horizon: 1.0,
        r: 1.0 - 1.0 / rho,
        rho,
        p: 2.0,
    };
    let u0 = problem.u0.coeffs.clone();
    let solver = Solver::new(problem, Arc::new(TimeGrid::uniform(1.0, 512)?), false)?;
    let opts = PicardOptions::default();
    let noise = solver.noise(7, 0)?;
    let (u, cert) = solver.picard_auto(&noise, opts)?;
    c.check(
        cert.ratio <= 0.9 && cert.converged && cert.iterations <= 30,
        format!("alpha {}: ratio {:.4}, {} iterations to tol {:e}", cert.alpha, cert.ratio, cert.iterations, opts.tol),
    );
    let start = SolutionPath::free_evolution(&solver.bank, &u0);
    let (v, _) = solver.picard_from(start, &noise, cert.alpha, opts)?;
    let diff = u.distance(&v, &basis, solver.problem.s0(), |_| 1.0);
    c.check(diff <= 10.0 * opts.tol, format!("starts 0 and S(t)u0 differ by {diff:.2e}"));
    c.finish()
}

fn lenient_bank(rho: f64, modes: usize, steps: usize) -> Result<ResolventBank, Box<dyn std::error::Error>> {
    let opts = BankOptions {
        derivatives: false,
        strict: false,
    };
    let grid = Arc::new(TimeGrid::uniform(1.0, steps)?);
    Ok(ResolventBank::build(&KernelSpec::riesz(rho), Arc::new(SpectralBasis::new(modes)), grid, opts)?)
}

fn holder_slope(cov: CovarianceSpec, modes: usize, steps: usize, s: f64) -> Result<(f64, f64), Box<dyn std::error::Error>> {
    let bank = lenient_bank(1.5, modes, steps)?;
    let design = HolderDesign::dyadic(&bank.grid)?;
    let sampler = MarginalSampler::new(&bank, &cov, &vec![1.0; modes], &design.nodes(), ItoRule::LeftPoint)?;
    let obs = Observations::from_sampler(Arc::clone(&bank.basis), &bank.grid, &sampler, 17, 10_000);
    let fit = holder_fit(&obs, &design, s, 2.0)?;
    Ok((fit.slope, fit.half_width))
}

fn criterion_7() -> Outcome {
    let mut c = Checks::default();
    let rho = 1.5;
    // Trace-class: r = 1 − 1/ρ, s = s₀ = 0, κ = −1.
    let predicted = predicted_exponent(kappa(1.0 - 1.0 / rho, 0.0, rho));
    let (slope, hw) = holder_slope(CovarianceSpec::PowerDiagonal { gamma: 1.0 }, 64, 4096, 0.0)?;
    c.check(
        (slope - predicted).abs() <= 0.05,
        format!("trace-class: slope {slope:.4} (±{hw:.4}) vs {predicted} ± 0.05"),
    );
    // White noise: r = −1/6, s = 0, κ = −7/4.
    let predicted = predicted_exponent(kappa(-1.0 / 6.0, 0.0, rho));
    let (slope, hw) = holder_slope(CovarianceSpec::White, 512, 20480, 0.0)?;
    c.check(
        (slope - predicted).abs() <= 0.05,
        format!("white noise: slope {slope:.4} (±{hw:.4}) vs {predicted} ± 0.05"),
    );
    c.finish()
}

fn criterion_8() -> Outcome {
    let mut c = Checks::default();
    for kappa in [-1.75, -1.0, -0.25] {
        for (t, h) in [(1.0, 0.1), (0.5, 1e-3), (2.0, 0.7)] {
            let closed = kappa_integrals(kappa, t, h)?;
            let (q1, q2) = kappa_integrals_quadrature(kappa, t, h)?;
            let err = ((closed.i1 - q1) / q1).abs().max(((closed.i2 - q2) / q2).abs());
            c.check(err <= 1e-10, format!("kappa {kappa} t {t} h {h}: relative gap {err:.1e}"));
        }
        let s = kappa_slopes(kappa, 1.0, &kappa_h_grid())?;
        c.check(
            (s.slope_i1 - s.target).abs() <= 0.02 && (s.slope_i2 - s.target).abs() <= 0.02,
            format!("kappa {kappa}: slopes {:.4} {:.4} vs {:.4} ± 0.02", s.slope_i1, s.slope_i2, s.target),
        );
    }
    c.finish()
}

/// `E sup_t ‖W_S(t)‖²` at 64 equally spaced times for `N` and `2N` modes.
fn max_bound_pair(cov: &CovarianceSpec, modes: usize, steps: usize, s_values: &[f64]) -> Result<Vec<MaxBoundStability>, Box<dyn std::error::Error>> {
    let mut per_level = Vec::new();
    for level in 0..2 {
        let (m, n) = (modes << level, steps << level);
        let bank = lenient_bank(1.5, m, n)?;
        let nodes: Vec<usize> = (1..=64).map(|i| i * n / 64).collect();
        let sampler = MarginalSampler::new(&bank, cov, &vec![1.0; m], &nodes, ItoRule::LeftPoint)?;
        let obs = Observations::from_sampler(Arc::clone(&bank.basis), &bank.grid, &sampler, 29, 2000);
        per_level.push(s_values.iter().map(|&s| max_bound(&obs, s, 2.0)).collect::<Vec<_>>());
    }
    let fine = per_level.pop().ok_or("missing level")?;
    let coarse = per_level.pop().ok_or("missing level")?;
    Ok(coarse.into_iter().zip(fine).map(|(a, b)| MaxBoundStability::new(a, b)).collect())
}

fn criterion_9() -> Outcome {
    let mut c = Checks::default();
    let trace = max_bound_pair(&CovarianceSpec::PowerDiagonal { gamma: 1.0 }, 64, 1024, &[0.0, 0.2])?;
    for m in &trace {
        c.check(m.stable, format!("trace-class s = {}: change {:+.2}%", m.coarse.s, 100.0 * m.relative_change));
    }
    let white = max_bound_pair(&CovarianceSpec::White, 128, 4096, &[0.0, 0.5])?;
    c.check(
        white[0].stable,
        format!("white noise s = 0: change {:+.2}%", 100.0 * white[0].relative_change),
    );
    c.check(
        white[1].relative_change >= 0.3,
        format!("white noise s = 0.5: change {:+.2}% (expected ≥ 30%)", 100.0 * white[1].relative_change),
    );
    c.finish()
}

fn data_files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, Box<dyn std::error::Error>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        files.push((path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path)?));
    }
    files.sort();
    Ok(files)
}

fn criterion_10() -> Outcome {
    let mut c = Checks::default();
    let tmp = tempfile::tempdir()?;
    let runs: [(&str, &[&str]); 3] = [
        ("certify-kernel", &[]),
        ("scalar-resolvent", &[]),
        (
            "simulate",
            &["--set", "discretization.modes=16", "--set", "discretization.steps=128", "--set", "noise.paths=8"],
        ),
    ];
    for (cmd, extra) in runs {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let dir = tmp.path().join(format!("{cmd}-{rep}"));
            let status = Command::new(env!("CARGO_BIN_EXE_svl"))
                .arg(cmd)
                .args(["--config", "riesz-demo", "--seed", "99", "--no-timestamp", "--output"])
                .arg(&dir)
                .args(extra)
                .output()?;
            if !status.status.success() {
                return Err(format!("{cmd} failed: {}", String::from_utf8_lossy(&status.stderr)).into());
            }
            outputs.push(data_files(&dir)?);
        }
        let same = outputs[0] == outputs[1];
        c.check(same && !outputs[0].is_empty(), format!("{cmd}: {} files byte-identical", outputs[0].len()));
    }
    c.finish()
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "kernel certification numbers", criterion_1),
        (2, "scalar resolvent vs Mittag-Leffler", criterion_2),
        (3, "scalar estimate scalings", criterion_3),
        (4, "smoothing exponents", criterion_4),
        (5, "discrete Ito isometry", criterion_5),
        (6, "Picard contraction certificate", criterion_6),
        (7, "Hölder exponents", criterion_7),
        (8, "kappa integrals", criterion_8),
        (9, "maximal-bound stability", criterion_9),
        (10, "reproducibility", criterion_10),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, run) in criteria {
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(lines) => println!("criterion {n:>2} PASS ({secs:.1} s) {name}\n    {}", lines.join("\n    ")),
            Err(e) => {
                failed += 1;
                println!("criterion {n:>2} FAIL ({secs:.1} s) {name}\n    {e}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
