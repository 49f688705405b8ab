//! Subcommand orchestration: each run reads an [`ExperimentConfig`], writes
//! its artifacts to the output directory and collects the checks that failed.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use thiserror::Error;

use crate::config::{AlphaPolicy, ConfigError, ExperimentConfig};
use crate::grid::{GridKind, TimeGrid};
use crate::kernel::{certify, AssumptionReport, CertifyOptions};
use crate::mild::{PicardOptions, ProblemSpec, Solver};
use crate::noise::{ItoRule, MarginalSampler};
use crate::regularity::{regularity_report, HolderDesign, Observations, RegularityReport};
use crate::report::{fmt_float, to_json, Table};
use crate::resolvent::{scaling_report, ResolventWeights, ScalingReport};
use crate::spectral::{measure_smoothing, BankOptions, ResolventBank, SmoothingQuantity, SmoothingReport, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    CertifyKernel,
    ScalarResolvent,
    Smoothing,
    Simulate,
    Holder,
    FullReport,
}

impl Subcommand {
    pub const ALL: [Subcommand; 6] = [
        Subcommand::CertifyKernel,
        Subcommand::ScalarResolvent,
        Subcommand::Smoothing,
        Subcommand::Simulate,
        Subcommand::Holder,
        Subcommand::FullReport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::CertifyKernel => "certify-kernel",
            Subcommand::ScalarResolvent => "scalar-resolvent",
            Subcommand::Smoothing => "smoothing",
            Subcommand::Simulate => "simulate",
            Subcommand::Holder => "holder",
            Subcommand::FullReport => "full-report",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {message}")]
    Numerical { context: &'static str, message: String },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{} check(s) failed: {}", .0.len(), .0.join("; "))]
    Assertion(Vec<String>),
}

impl HarnessError {
    /// 1 configuration, 2 numerical or I/O failure, 3 failed check.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Numerical { .. } | HarnessError::Io { .. } => 2,
            HarnessError::Assertion(_) => 3,
        }
    }
}

fn numerical(context: &'static str) -> impl Fn(&dyn fmt::Display) -> HarnessError {
    move |e| HarnessError::Numerical {
        context,
        message: e.to_string(),
    }
}

macro_rules! num {
    ($ctx:expr, $e:expr) => {
        $e.map_err(|e| numerical($ctx)(&e))
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// First line `# generated <unix seconds>` in CSV and data files.
    pub timestamp: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { timestamp: true }
    }
}

/// A measured quantity next to its prediction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub quantity: String,
    pub measured: f64,
    pub predicted: f64,
    pub tolerance: f64,
    /// `within`, `at_least` (measured ≥ predicted − tolerance), `at_most`
    /// (measured ≤ predicted) or `report` (no check).
    pub check: &'static str,
    pub pass: bool,
}

impl SummaryRow {
    fn new(quantity: impl Into<String>, measured: f64, predicted: f64, tolerance: f64) -> Self {
        Self {
            quantity: quantity.into(),
            measured,
            predicted,
            tolerance,
            check: "within",
            pass: (measured - predicted).abs() <= tolerance,
        }
    }

    fn at_least(quantity: impl Into<String>, measured: f64, predicted: f64, tolerance: f64) -> Self {
        Self {
            check: "at_least",
            pass: measured >= predicted - tolerance,
            ..Self::new(quantity, measured, predicted, tolerance)
        }
    }

    fn at_most(quantity: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self {
            check: "at_most",
            pass: measured <= bound,
            ..Self::new(quantity, measured, bound, 0.0)
        }
    }

    fn report(quantity: impl Into<String>, measured: f64, predicted: f64) -> Self {
        Self {
            check: "report",
            pass: true,
            ..Self::new(quantity, measured, predicted, f64::INFINITY)
        }
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<SummaryRow>,
    /// Descriptions of failed checks besides summary rows.
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn failed_checks(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .summary
            .iter()
            .filter(|r| !r.pass)
            .map(|r| {
                let expected = match r.check {
                    "at_least" => format!("at least {} - {}", r.predicted, r.tolerance),
                    "at_most" => format!("at most {}", r.predicted),
                    _ => format!("{} ± {}", r.predicted, r.tolerance),
                };
                format!("{} = {} (expected {expected})", r.quantity, r.measured)
            })
            .collect();
        v.extend(self.failures.iter().cloned());
        v
    }
}

struct Writer<'a> {
    dir: &'a Path,
    cfg: &'a ExperimentConfig,
    stamp: Option<u64>,
    files: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(cfg: &'a ExperimentConfig, opts: &RunOptions) -> Result<Self, HarnessError> {
        let dir = cfg.output.dir.as_path();
        std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let stamp = opts
            .timestamp
            .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
        Ok(Self {
            dir,
            cfg,
            stamp,
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, body: &str) -> Result<(), HarnessError> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).map_err(|source| HarnessError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, stem: &str, value: &T) -> Result<(), HarnessError> {
        if !self.cfg.output.wants("json") {
            return Ok(());
        }
        let body = num!("json", to_json(value))?;
        self.write(&format!("{stem}.json"), &body)
    }

    fn table(&mut self, stem: &str, table: &Table) -> Result<(), HarnessError> {
        let header = self.stamp.map(|s| format!("# generated {s}\n")).unwrap_or_default();
        if self.cfg.output.wants("csv") {
            self.write(&format!("{stem}.csv"), &format!("{header}{}", table.to_csv()))?;
        }
        if self.cfg.output.wants("gnuplot") {
            self.write(&format!("{stem}.dat"), &format!("{header}{}", table.to_gnuplot()))?;
        }
        Ok(())
    }
}

/// Runs one subcommand. Artifacts are written even when checks fail; the
/// failures then come back as [`HarnessError::Assertion`].
pub fn run(cmd: Subcommand, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome, HarnessError> {
    let mut w = Writer::new(cfg, opts)?;
    let mut out = Outcome::default();
    match cmd {
        Subcommand::CertifyKernel => certify_kernel(cfg, &mut w, &mut out)?,
        Subcommand::ScalarResolvent => scalar_resolvent(cfg, &mut w, &mut out)?,
        Subcommand::Smoothing => smoothing(cfg, &mut w, &mut out)?,
        Subcommand::Simulate => simulate(cfg, &mut w, &mut out)?,
        Subcommand::Holder => holder(cfg, &mut w, &mut out)?,
        Subcommand::FullReport => {
            certify_kernel(cfg, &mut w, &mut out)?;
            scalar_resolvent(cfg, &mut w, &mut out)?;
            smoothing(cfg, &mut w, &mut out)?;
            simulate(cfg, &mut w, &mut out)?;
            holder(cfg, &mut w, &mut out)?;
            let mut t = Table::new(&["quantity", "measured", "predicted", "tolerance", "check", "pass"]);
            for r in &out.summary {
                t.push(vec![
                    r.quantity.clone(),
                    fmt_float(r.measured),
                    fmt_float(r.predicted),
                    fmt_float(r.tolerance),
                    r.check.to_string(),
                    r.pass.to_string(),
                ]);
            }
            w.table("summary", &t)?;
        }
    }
    out.files = w.files;
    let failed = out.failed_checks();
    if failed.is_empty() {
        Ok(out)
    } else {
        Err(HarnessError::Assertion(failed))
    }
}

/// Certification verdict for the configured kernel.
pub fn certify_kernel_report(cfg: &ExperimentConfig) -> Result<AssumptionReport, HarnessError> {
    num!("certify-kernel", certify(&cfg.kernel, &CertifyOptions::default()))
}

fn certify_kernel(cfg: &ExperimentConfig, w: &mut Writer, out: &mut Outcome) -> Result<(), HarnessError> {
    let report = certify_kernel_report(cfg)?;
    w.json("assumption_report", &report)?;
    let mut t = Table::new(&["condition", "value", "threshold", "pass"]);
    for c in &report.conditions {
        t.push(vec![c.name.clone(), fmt_float(c.value), fmt_float(c.threshold), c.pass.to_string()]);
        if c.required && !c.pass {
            out.failures.push(format!("kernel condition {} failed (value {})", c.name, c.value));
        }
    }
    w.table("assumption_conditions", &t)?;
    out.summary.push(SummaryRow::report("rho_growth", report.rho_growth, cfg.problem.rho));
    out.summary.push(SummaryRow::report("rho_sector", report.rho_sector, cfg.problem.rho));
    Ok(())
}

fn scalar_resolvent(cfg: &ExperimentConfig, w: &mut Writer, out: &mut Outcome) -> Result<(), HarnessError> {
    let rc = &cfg.resolvent;
    let grid = num!("scalar-resolvent grid", TimeGrid::graded(rc.horizon, rc.steps, rc.grading))?;
    let weights = num!("scalar-resolvent", ResolventWeights::new(&cfg.kernel, Arc::new(grid), true))?;
    let tables = rc
        .mus
        .iter()
        .map(|&mu| num!("scalar-resolvent", weights.solve(mu, true)))
        .collect::<Result<Vec<_>, _>>()?;
    for (i, tab) in tables.iter().enumerate() {
        w.table(&format!("scalar_resolvent_mu{i}"), &tab.to_table())?;
    }
    let report: ScalingReport = num!("scalar-resolvent scaling", scaling_report(&cfg.kernel, &tables))?;
    w.json("scaling_report", &report)?;
    let mut t = Table::new(&["mu", "s_l1", "sdot_l1", "t_sdot_l1", "t_sddot_l1", "t2_sddot_l1", "sup_abs_s"]);
    for r in &report.rows {
        t.push_floats(&[r.mu, r.s_l1, r.sdot_l1, r.t_sdot_l1, r.t_sddot_l1, r.t2_sddot_l1, r.sup_abs_s]);
    }
    w.table("scaling_norms", &t)?;
    for c in &report.slopes {
        let name = format!("mu_slope_{}", c.name);
        out.summary.push(if rc.check {
            SummaryRow::new(name, c.slope, c.target, rc.tolerance)
        } else {
            SummaryRow::report(name, c.slope, c.target)
        });
    }
    if report.max_abs_s > 1.0 + 1e-6 {
        out.failures.push(format!("sup |s| = {} exceeds 1", report.max_abs_s));
    }
    Ok(())
}

/// Smoothing fits for `S` and `Ṡ` at `s ∈ {1/(2ρ), 1/ρ}` and `A^{−1}Ṡ`.
pub fn smoothing_reports(cfg: &ExperimentConfig) -> Result<Vec<SmoothingReport>, HarnessError> {
    let sc = &cfg.smoothing;
    let rho = cfg.problem.rho;
    let grid = Arc::new(num!("smoothing grid", TimeGrid::uniform(sc.horizon, sc.steps))?);
    let basis = Arc::new(crate::spectral::SpectralBasis::new(sc.modes));
    let bank = num!(
        "smoothing bank",
        ResolventBank::build(
            &cfg.kernel,
            basis,
            grid,
            BankOptions {
                derivatives: true,
                strict: cfg.discretization.strict,
            },
        )
    )?;
    let mut reports = Vec::new();
    for s in [0.5 / rho, 1.0 / rho] {
        for quantity in [SmoothingQuantity::S, SmoothingQuantity::Sdot] {
            reports.push(num!("smoothing", measure_smoothing(&bank, quantity, s, rho, None, 40))?);
        }
    }
    reports.push(num!(
        "smoothing",
        measure_smoothing(&bank, SmoothingQuantity::InverseSdot, 1.0, rho, None, 40)
    )?);
    Ok(reports)
}

fn smoothing(cfg: &ExperimentConfig, w: &mut Writer, out: &mut Outcome) -> Result<(), HarnessError> {
    let reports = smoothing_reports(cfg)?;
    w.json("smoothing", &reports)?;
    let mut t = Table::new(&["quantity", "s", "t", "norm", "argmax"]);
    for r in &reports {
        for p in &r.points {
            t.push(vec![
                r.quantity.label().to_string(),
                fmt_float(r.s),
                fmt_float(p.t),
                fmt_float(p.norm),
                p.argmax.to_string(),
            ]);
        }
        let name = format!("smoothing_{}_s{:.4}", r.quantity.label(), r.s);
        out.summary.push(if cfg.smoothing.check {
            SummaryRow::new(name, r.slope, r.target, cfg.smoothing.tolerance)
        } else {
            SummaryRow::report(name, r.slope, r.target)
        });
    }
    w.table("smoothing_points", &t)?;
    Ok(())
}

/// Problem, grid and solver for the configured discretisation.
pub fn build_solver(cfg: &ExperimentConfig) -> Result<Solver, HarnessError> {
    let d = &cfg.discretization;
    if d.grid != GridKind::Uniform {
        return Err(ConfigError::Invalid {
            key: "discretization.grid".into(),
            line: None,
            msg: "simulation needs a uniform grid".into(),
        }
        .into());
    }
    let basis = cfg.basis();
    let problem = ProblemSpec {
        kernel: cfg.kernel.clone(),
        basis: Arc::clone(&basis),
        cov: cfg.noise.covariance.clone(),
        f: cfg.problem.f.clone(),
        g: cfg.problem.g.clone(),
        u0: num!("initial data", SpectralField::new(Arc::clone(&basis), cfg.problem.u0.coeffs(d.modes)))?,
        horizon: d.horizon,
        r: cfg.problem.r,
        rho: cfg.problem.rho,
        p: cfg.problem.p,
    };
    let grid = Arc::new(num!("grid", TimeGrid::uniform(d.horizon, d.steps))?);
    num!("solver", Solver::new(problem, grid, d.strict))
}

fn picard_options(cfg: &ExperimentConfig) -> (Option<f64>, PicardOptions) {
    let alpha = match cfg.measurement.alpha {
        AlphaPolicy::Auto => None,
        AlphaPolicy::Fixed { alpha } => Some(alpha),
    };
    (
        alpha,
        PicardOptions {
            tol: cfg.measurement.tol,
            max_iter: cfg.measurement.max_iter,
        },
    )
}

/// Up to 65 equally spaced output nodes.
fn output_nodes(steps: usize) -> Vec<usize> {
    let stride = steps.div_ceil(64).max(1);
    let mut v: Vec<usize> = (0..=steps).step_by(stride).collect();
    if *v.last().unwrap() != steps {
        v.push(steps);
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CertificateSummary {
    n_paths: usize,
    alpha_min: f64,
    alpha_max: f64,
    ratio_max: f64,
    iterations_max: usize,
    paths: Vec<(f64, f64, usize)>,
}

fn simulate(cfg: &ExperimentConfig, w: &mut Writer, out: &mut Outcome) -> Result<(), HarnessError> {
    let solver = build_solver(cfg)?;
    let (alpha, opts) = picard_options(cfg);
    let nodes = output_nodes(cfg.discretization.steps);
    let s_values = cfg.measurement.s.clone();
    let p = cfg.problem.p;
    let basis = Arc::clone(&solver.problem.basis);
    let lam = basis.eigenvalues().to_vec();
    let per_path = num!(
        "simulate",
        solver.ensemble_map(cfg.noise.seed, cfg.noise.paths, alpha, opts, |u| {
            s_values
                .iter()
                .map(|&s| {
                    nodes
                        .iter()
                        .map(|&j| {
                            let n2: f64 = u.at(j).iter().zip(&lam).map(|(x, l)| l.powf(s) * x * x).sum();
                            n2.powf(p / 2.0)
                        })
                        .collect::<Vec<f64>>()
                })
                .collect::<Vec<_>>()
        })
    )?;
    let n = per_path.len() as f64;
    let t = solver.grid().nodes();
    let mut table = Table::new(&["t", "s", "lp_norm", "stderr", "n_paths"]);
    for (si, &s) in s_values.iter().enumerate() {
        for (a, &j) in nodes.iter().enumerate() {
            let vals: Vec<f64> = per_path.iter().map(|(v, _)| v[si][a]).collect();
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
            let norm = mean.powf(1.0 / p);
            let stderr = if mean > 0.0 { norm * (var / n).sqrt() / (p * mean) } else { 0.0 };
            table.push(vec![fmt_float(t[j]), fmt_float(s), fmt_float(norm), fmt_float(stderr), per_path.len().to_string()]);
        }
    }
    w.table("ensemble_stats", &table)?;
    let certs: Vec<_> = per_path.iter().map(|(_, c)| c).collect();
    let summary = CertificateSummary {
        n_paths: certs.len(),
        alpha_min: certs.iter().map(|c| c.alpha).fold(f64::INFINITY, f64::min),
        alpha_max: certs.iter().map(|c| c.alpha).fold(0.0, f64::max),
        ratio_max: certs.iter().map(|c| c.ratio).fold(0.0, f64::max),
        iterations_max: certs.iter().map(|c| c.iterations).max().unwrap_or(0),
        paths: certs.iter().map(|c| (c.alpha, c.ratio, c.iterations)).collect(),
    };
    w.json("certificates", &summary)?;
    if !solver.is_linear_additive() {
        out.summary.push(SummaryRow::at_most("picard_ratio_max", summary.ratio_max, 0.9));
    }
    Ok(())
}

/// Observations at the Hölder design nodes plus the output nodes. The linear
/// additive case is sampled from the exact discrete law; otherwise paths are
/// solved.
pub fn holder_observations(cfg: &ExperimentConfig, solver: &Solver) -> Result<(HolderDesign, Observations), HarnessError> {
    let design = num!("holder design", HolderDesign::dyadic(solver.grid()))?;
    let mut nodes = design.nodes();
    nodes.extend(output_nodes(cfg.discretization.steps));
    nodes.sort_unstable();
    nodes.dedup();
    let basis = Arc::clone(&solver.problem.basis);
    let modes = basis.modes();
    let obs = if solver.is_linear_additive() {
        let g = match solver.problem.g {
            crate::mild::GMap::ZeroNoise => vec![0.0; modes],
            _ => vec![1.0; modes],
        };
        let sampler = num!(
            "holder sampler",
            MarginalSampler::new(&solver.bank, &solver.problem.cov, &g, &nodes, ItoRule::LeftPoint)
        )?;
        let mut obs = Observations::from_sampler(Arc::clone(&basis), solver.grid(), &sampler, cfg.noise.seed, cfg.noise.paths);
        let u0 = &solver.problem.u0.coeffs;
        if u0.iter().any(|&c| c != 0.0) {
            for sample in &mut obs.samples {
                for (a, &j) in nodes.iter().enumerate() {
                    for k in 0..modes {
                        sample[a * modes + k] += solver.bank.tables[k].s[j] * u0[k];
                    }
                }
            }
        }
        obs
    } else {
        let (alpha, opts) = picard_options(cfg);
        let samples = num!(
            "holder",
            solver.ensemble_map(cfg.noise.seed, cfg.noise.paths, alpha, opts, |u| {
                nodes.iter().flat_map(|&j| u.at(j).iter().copied()).collect::<Vec<f64>>()
            })
        )?;
        let t = solver.grid().nodes();
        Observations {
            basis,
            times: nodes.iter().map(|&j| t[j]).collect(),
            modes,
            samples: samples.into_iter().map(|(v, _)| v).collect(),
        }
    };
    Ok((design, obs))
}

pub fn holder_report(cfg: &ExperimentConfig) -> Result<RegularityReport, HarnessError> {
    let cfg = &cfg.for_measurement();
    let solver = build_solver(cfg)?;
    let (design, obs) = holder_observations(cfg, &solver)?;
    num!(
        "holder",
        regularity_report(
            &obs,
            &design,
            cfg.problem.r,
            cfg.problem.rho,
            &cfg.measurement.s,
            cfg.problem.p,
            cfg.measurement.tolerance,
            solver.is_linear_additive(),
        )
    )
}

fn holder(cfg: &ExperimentConfig, w: &mut Writer, out: &mut Outcome) -> Result<(), HarnessError> {
    let report = holder_report(cfg)?;
    w.json("regularity_report", &report)?;
    let mut t = Table::new(&["s", "h", "d", "d_sup"]);
    let mut pred = Table::new(&["s", "kappa", "predicted", "measured", "half_width", "measured_sup", "max_bound", "pass"]);
    for row in &report.rows {
        for ((h, d), ds) in row.holder.lags.iter().zip(&row.holder.d).zip(&row.holder.d_sup) {
            t.push_floats(&[row.s, *h, *d, *ds]);
        }
        pred.push(vec![
            fmt_float(row.s),
            fmt_float(row.kappa),
            fmt_float(row.predicted),
            fmt_float(row.holder.slope),
            fmt_float(row.holder.half_width),
            fmt_float(row.holder.slope_sup),
            fmt_float(row.max_bound.value),
            row.pass.to_string(),
        ]);
        let (name, slope) = (format!("holder_s{:.4}", row.s), row.holder.slope);
        out.summary.push(if report.sharp {
            SummaryRow::new(name, slope, row.predicted, report.tolerance)
        } else {
            SummaryRow::at_least(name, slope, row.predicted, report.tolerance)
        });
    }
    w.table("holder_increments", &t)?;
    w.table("holder_summary", &pred)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for c in Subcommand::ALL {
            assert_eq!(Subcommand::from_name(c.name()), Some(c));
        }
        assert_eq!(Subcommand::from_name("nope"), None);
    }

    #[test]
    fn exit_codes() {
        let e: HarnessError = ConfigError::Missing { key: "kernel.variant".into() }.into();
        assert_eq!(e.exit_code(), 1);
        assert_eq!(e.to_string(), "kernel.variant: required");
        assert_eq!(HarnessError::Assertion(vec!["x".into()]).exit_code(), 3);
        assert_eq!(numerical("ctx")(&"boom").exit_code(), 2);
    }

    #[test]
    fn output_nodes_cover_the_grid() {
        assert_eq!(output_nodes(4), vec![0, 1, 2, 3, 4]);
        let v = output_nodes(512);
        assert_eq!(v.len(), 65);
        assert_eq!(*v.last().unwrap(), 512);
        assert_eq!(output_nodes(100).last(), Some(&100));
    }
}
