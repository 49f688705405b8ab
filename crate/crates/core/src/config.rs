//! Experiment configuration: a sectioned `key = value` text file (TOML
//! syntax), optional `--set section.key=value` overrides, and four built-in
//! presets.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;
use toml::{Table, Value};

use crate::grid::GridKind;
use crate::kernel::{KernelSpec, LaplaceKernel, TabulatedKernel};
use crate::mild::{FMap, GMap, ScalarFn};
use crate::noise::CovarianceSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{key}: required")]
    Missing { key: String },
    #[error("{}{key}: {msg}", line_prefix(*.line))]
    Invalid { key: String, line: Option<usize>, msg: String },
    #[error("{}unknown key {key}", line_prefix(*.line))]
    UnknownKey { key: String, line: Option<usize> },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("--set {0}: expected section.key=value")]
    BadOverride(String),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn line_prefix(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

pub const PRESETS: [(&str, &str); 4] = [
    ("riesz-demo", include_str!("../configs/riesz-demo.cfg")),
    ("finite-history-demo", include_str!("../configs/finite-history-demo.cfg")),
    ("laplace-example-demo", include_str!("../configs/laplace-example-demo.cfg")),
    ("white-noise-demo", include_str!("../configs/white-noise-demo.cfg")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

const KEYS: &[(&str, &[&str])] = &[
    ("kernel", &["variant", "rho", "eta", "a", "w", "m", "times", "values"]),
    ("discretization", &["modes", "steps", "horizon", "grid", "grading", "strict"]),
    ("resolvent", &["mus", "horizon", "steps", "grading", "tolerance", "check"]),
    ("smoothing", &["modes", "steps", "horizon", "tolerance", "check"]),
    ("noise", &["covariance", "gamma", "q", "seed", "paths"]),
    (
        "problem",
        &["f", "f_lipschitz", "f_coeffs", "g", "g_lipschitz", "g_coeffs", "u0", "u0_mode", "u0_amplitude", "u0_coeffs", "r", "rho", "p"],
    ),
    ("measurement", &["s", "alpha", "tol", "max_iter", "tolerance", "modes", "steps"]),
    ("output", &["dir", "formats"]),
];

/// Parsed text plus the line of every `section.key`.
#[derive(Debug, Clone)]
pub struct RawConfig {
    table: Table,
    lines: HashMap<String, usize>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e.span().map_or(1, |s| text[..s.start.min(text.len())].lines().count().max(1));
            ConfigError::Syntax {
                line,
                msg: e.message().to_string(),
            }
        })?;
        let mut lines = HashMap::new();
        let mut section = String::new();
        for (i, l) in text.lines().enumerate() {
            let l = l.trim();
            if let Some(rest) = l.strip_prefix('[') {
                section = rest.trim_end_matches(']').trim().to_string();
            } else if let Some((k, _)) = l.split_once('=') {
                if !l.starts_with('#') {
                    lines.insert(format!("{section}.{}", k.trim()), i + 1);
                }
            }
        }
        Ok(Self { table, lines })
    }

    /// Reads a file, or a preset when `path` names one and no such file exists.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        if !path.exists() {
            if let Some(text) = path.to_str().and_then(preset) {
                return Self::parse(text);
            }
        }
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Applies `section.key=value`; the value is read as a TOML value when
    /// possible and as a bare string otherwise.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadOverride(assignment.to_string());
        let (path, value) = assignment.split_once('=').ok_or_else(bad)?;
        let (section, key) = path.trim().split_once('.').ok_or_else(bad)?;
        if section.is_empty() || key.is_empty() {
            return Err(bad());
        }
        let value = format!("v = {}", value.trim())
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(value.trim().to_string()));
        let entry = self
            .table
            .entry(section.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        match entry {
            Value::Table(t) => {
                t.insert(key.to_string(), value);
            }
            _ => return Err(bad()),
        }
        self.lines.remove(&format!("{section}.{key}"));
        Ok(())
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.lines.get(key).copied()
    }

    fn invalid(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            key: key.to_string(),
            line: self.line(key),
            msg: msg.into(),
        }
    }

    fn check_keys(&self) -> Result<(), ConfigError> {
        for (section, v) in &self.table {
            let allowed = KEYS.iter().find(|(s, _)| s == section).map(|(_, k)| *k);
            let Some(allowed) = allowed else {
                return Err(ConfigError::UnknownKey {
                    key: section.clone(),
                    line: None,
                });
            };
            let Value::Table(t) = v else {
                return Err(self.invalid(section, "expected a section"));
            };
            for k in t.keys() {
                if !allowed.contains(&k.as_str()) {
                    let key = format!("{section}.{k}");
                    return Err(ConfigError::UnknownKey {
                        line: self.line(&key),
                        key,
                    });
                }
            }
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&Value> {
        let (s, k) = key.split_once('.')?;
        self.table.get(s)?.as_table()?.get(k)
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(self.invalid(key, "expected a number")),
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    fn f64_req(&self, key: &str) -> Result<f64, ConfigError> {
        self.f64_opt(key)?.ok_or_else(|| ConfigError::Missing { key: key.into() })
    }

    fn uint_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as u64),
            Some(_) => Err(self.invalid(key, "expected a non-negative integer")),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(self.invalid(key, "expected true or false")),
        }
    }

    fn str_opt(&self, key: &str) -> Result<Option<&str>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(self.invalid(key, "expected a string")),
        }
    }

    fn list_opt(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(self.invalid(key, "expected a list of numbers")),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(Value::Float(x)) => Ok(Some(vec![*x])),
            Some(Value::Integer(i)) => Ok(Some(vec![*i as f64])),
            Some(_) => Err(self.invalid(key, "expected a list of numbers")),
        }
    }

    fn list_req(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.list_opt(key)?.ok_or_else(|| ConfigError::Missing { key: key.into() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discretization {
    pub modes: usize,
    pub steps: usize,
    pub horizon: f64,
    pub grid: GridKind,
    /// Reject modes failing the coarseness heuristic.
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolventSection {
    pub mus: Vec<f64>,
    pub horizon: f64,
    pub steps: usize,
    pub grading: f64,
    pub tolerance: f64,
    /// Judge the fitted μ-slopes; otherwise they are only reported.
    pub check: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothingSection {
    pub modes: usize,
    pub steps: usize,
    pub horizon: f64,
    pub tolerance: f64,
    /// Judge the fitted exponents; otherwise they are only reported.
    pub check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseSection {
    pub covariance: CovarianceSpec,
    pub seed: u64,
    pub paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    Zero,
    Mode { mode: usize, amplitude: f64 },
    Coeffs { coeffs: Vec<f64> },
}

impl InitialData {
    pub fn coeffs(&self, modes: usize) -> Vec<f64> {
        let mut c = vec![0.0; modes];
        match self {
            InitialData::Zero => {}
            InitialData::Mode { mode, amplitude } => {
                if (1..=modes).contains(mode) {
                    c[mode - 1] = *amplitude;
                }
            }
            InitialData::Coeffs { coeffs } => {
                for (a, b) in c.iter_mut().zip(coeffs) {
                    *a = *b;
                }
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSection {
    pub f: FMap,
    pub g: GMap,
    pub u0: InitialData,
    pub r: f64,
    pub rho: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum AlphaPolicy {
    Auto,
    Fixed { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measurement {
    pub s: Vec<f64>,
    pub alpha: AlphaPolicy,
    pub tol: f64,
    pub max_iter: usize,
    /// Accepted distance between measured and predicted exponents.
    pub tolerance: f64,
    /// Resolution for the exact-law Hölder sampler of linear additive
    /// problems; the discretization section is used when absent.
    pub modes: Option<usize>,
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub formats: Vec<String>,
}

impl OutputSection {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kernel: KernelSpec,
    pub discretization: Discretization,
    pub resolvent: ResolventSection,
    pub smoothing: SmoothingSection,
    pub noise: NoiseSection,
    pub problem: ProblemSection,
    pub measurement: Measurement,
    pub output: OutputSection,
}

fn scalar_fn(raw: &RawConfig, key: &str, name: &str) -> Result<ScalarFn, ConfigError> {
    match name {
        "sin" => Ok(ScalarFn::Sin),
        "arctan" => Ok(ScalarFn::ScaledArctan),
        other => Err(raw.invalid(key, format!("unknown function {other:?}"))),
    }
}

fn kernel(raw: &RawConfig) -> Result<KernelSpec, ConfigError> {
    let variant = raw.str_opt("kernel.variant")?.ok_or_else(|| ConfigError::Missing {
        key: "kernel.variant".into(),
    })?;
    let k = match variant {
        "tempered-riesz" | "riesz" => KernelSpec::TemperedRiesz {
            rho: raw.f64_req("kernel.rho")?,
            eta: raw.f64_or("kernel.eta", 0.0)?,
        },
        "finite-history" => KernelSpec::FiniteHistory {
            rho: raw.f64_req("kernel.rho")?,
        },
        "laplace-example" => KernelSpec::LaplaceDefined(LaplaceKernel::reference_example()),
        "shifted-power" => {
            let m = raw.f64_req("kernel.m")?;
            if m.fract() != 0.0 {
                return Err(raw.invalid("kernel.m", "expected an integer"));
            }
            KernelSpec::LaplaceDefined(LaplaceKernel::shifted_power(
                raw.f64_req("kernel.a")?,
                raw.f64_req("kernel.w")?,
                m as i32,
            ))
        }
        "tabulated" => KernelSpec::Tabulated(
            TabulatedKernel::new(raw.list_req("kernel.times")?, raw.list_req("kernel.values")?)
                .map_err(|e| raw.invalid("kernel.values", e.to_string()))?,
        ),
        other => return Err(raw.invalid("kernel.variant", format!("unknown variant {other:?}"))),
    };
    k.validate().map_err(|e| raw.invalid("kernel.rho", e.to_string()))?;
    Ok(k)
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        raw.check_keys()?;
        let kernel = kernel(raw)?;

        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(raw.invalid(key, format!("must be positive, got {v}")))
            }
        };
        let count = |key: &str, default: u64| -> Result<usize, ConfigError> {
            let v = raw.uint_or(key, default)?;
            if v == 0 {
                return Err(raw.invalid(key, "must be at least 1"));
            }
            Ok(v as usize)
        };

        let grid = match raw.str_opt("discretization.grid")?.unwrap_or("uniform") {
            "uniform" => GridKind::Uniform,
            "graded" => {
                let exponent = raw.f64_or("discretization.grading", 2.0)?;
                if exponent < 1.0 {
                    return Err(raw.invalid("discretization.grading", "must be ≥ 1"));
                }
                GridKind::Graded { exponent }
            }
            other => return Err(raw.invalid("discretization.grid", format!("unknown grid {other:?}"))),
        };
        let discretization = Discretization {
            modes: count("discretization.modes", 64)?,
            steps: count("discretization.steps", 512)?,
            horizon: positive("discretization.horizon", raw.f64_or("discretization.horizon", 1.0)?)?,
            grid,
            strict: raw.bool_or("discretization.strict", true)?,
        };

        let mus = raw.list_opt("resolvent.mus")?.unwrap_or_else(|| vec![1.0, 10.0, 100.0, 1000.0]);
        for &mu in &mus {
            positive("resolvent.mus", mu)?;
        }
        let resolvent = ResolventSection {
            mus,
            horizon: positive("resolvent.horizon", raw.f64_or("resolvent.horizon", 15.0)?)?,
            steps: count("resolvent.steps", 4096)?,
            grading: raw.f64_or("resolvent.grading", 2.0)?,
            tolerance: positive("resolvent.tolerance", raw.f64_or("resolvent.tolerance", 0.05)?)?,
            check: raw.bool_or("resolvent.check", true)?,
        };
        if resolvent.grading < 1.0 {
            return Err(raw.invalid("resolvent.grading", "must be ≥ 1"));
        }
        let smoothing = SmoothingSection {
            modes: count("smoothing.modes", 256)?,
            steps: count("smoothing.steps", 8192)?,
            horizon: positive("smoothing.horizon", raw.f64_or("smoothing.horizon", 1.0)?)?,
            tolerance: positive("smoothing.tolerance", raw.f64_or("smoothing.tolerance", 0.1)?)?,
            check: raw.bool_or("smoothing.check", true)?,
        };

        let covariance = match raw.str_opt("noise.covariance")?.unwrap_or("white") {
            "white" => CovarianceSpec::White,
            "power" => CovarianceSpec::PowerDiagonal {
                gamma: raw.f64_req("noise.gamma")?,
            },
            "custom" => CovarianceSpec::CustomDiagonal {
                q: raw.list_req("noise.q")?,
            },
            other => return Err(raw.invalid("noise.covariance", format!("unknown covariance {other:?}"))),
        };
        covariance
            .validate()
            .map_err(|e| raw.invalid("noise.covariance", e.to_string()))?;
        let noise = NoiseSection {
            covariance,
            seed: raw.uint_or("noise.seed", 0)?,
            paths: count("noise.paths", 200)?,
        };

        let modes = discretization.modes;
        let f = match raw.str_opt("problem.f")?.unwrap_or("zero") {
            "zero" => FMap::Zero,
            "linear" => FMap::DiagonalLinear {
                c: padded(raw.list_req("problem.f_coeffs")?, modes),
            },
            name => FMap::Nemytskii {
                func: scalar_fn(raw, "problem.f", name)?,
                lipschitz: raw.f64_or("problem.f_lipschitz", 1.0)?,
            },
        };
        let g = match raw.str_opt("problem.g")?.unwrap_or("additive") {
            "zero" => GMap::ZeroNoise,
            "additive" => GMap::AdditiveIdentity,
            "diagonal" => GMap::DiagonalMultiplicative {
                g: padded(raw.list_req("problem.g_coeffs")?, modes),
            },
            name => GMap::NemytskiiMultiplicative {
                func: scalar_fn(raw, "problem.g", name)?,
                lipschitz: raw.f64_or("problem.g_lipschitz", 1.0)?,
            },
        };
        let u0 = match raw.str_opt("problem.u0")?.unwrap_or("zero") {
            "zero" => InitialData::Zero,
            "mode" => {
                let mode = raw.uint_or("problem.u0_mode", 1)? as usize;
                if mode == 0 || mode > modes {
                    return Err(raw.invalid("problem.u0_mode", format!("must lie in 1..={modes}")));
                }
                InitialData::Mode {
                    mode,
                    amplitude: raw.f64_or("problem.u0_amplitude", 1.0)?,
                }
            }
            "coeffs" => InitialData::Coeffs {
                coeffs: raw.list_req("problem.u0_coeffs")?,
            },
            other => return Err(raw.invalid("problem.u0", format!("unknown initial data {other:?}"))),
        };
        let rho = match raw.f64_opt("problem.rho")? {
            Some(r) => r,
            None => kernel
                .nominal_rho()
                .ok_or_else(|| ConfigError::Missing { key: "problem.rho".into() })?,
        };
        if !(rho > 1.0 && rho < 2.0) {
            return Err(raw.invalid("problem.rho", format!("rho = {rho} not in (1, 2)")));
        }
        let r = raw.f64_or("problem.r", 1.0 - 1.0 / rho)?;
        if r >= 1.0 {
            return Err(raw.invalid("problem.r", "must be < 1"));
        }
        let p = raw.f64_or("problem.p", 2.0)?;
        if p < 2.0 {
            return Err(raw.invalid("problem.p", "must be ≥ 2"));
        }
        let problem = ProblemSection { f, g, u0, r, rho, p };

        let s = raw.list_opt("measurement.s")?.unwrap_or_else(|| vec![r - 1.0 + 1.0 / rho]);
        for &sv in &s {
            if sv >= r - 1.0 + 2.0 / rho {
                return Err(raw.invalid("measurement.s", format!("s = {sv} must be < r − 1 + 2/ρ")));
            }
        }
        let alpha = match raw.get("measurement.alpha") {
            None => AlphaPolicy::Auto,
            Some(Value::String(a)) if a == "auto" => AlphaPolicy::Auto,
            Some(_) => AlphaPolicy::Fixed {
                alpha: positive("measurement.alpha", raw.f64_req("measurement.alpha")?)?,
            },
        };
        let measurement = Measurement {
            s,
            alpha,
            tol: positive("measurement.tol", raw.f64_or("measurement.tol", 1e-8)?)?,
            max_iter: count("measurement.max_iter", 30)?,
            tolerance: positive("measurement.tolerance", raw.f64_or("measurement.tolerance", 0.05)?)?,
            modes: raw.get("measurement.modes").map(|_| count("measurement.modes", 0)).transpose()?,
            steps: raw.get("measurement.steps").map(|_| count("measurement.steps", 0)).transpose()?,
        };

        let formats = match raw.get("output.formats") {
            None => vec!["json".into(), "csv".into(), "gnuplot".into()],
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v.as_str() {
                    Some(f @ ("json" | "csv" | "gnuplot")) => Ok(f.to_string()),
                    _ => Err(raw.invalid("output.formats", "entries must be json, csv or gnuplot")),
                })
                .collect::<Result<_, _>>()?,
            Some(_) => return Err(raw.invalid("output.formats", "expected a list")),
        };
        let output = OutputSection {
            dir: PathBuf::from(raw.str_opt("output.dir")?.unwrap_or("out")),
            formats,
        };

        Ok(Self {
            kernel,
            discretization,
            resolvent,
            smoothing,
            noise,
            problem,
            measurement,
            output,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    /// The configuration the Hölder measurement runs at. Resolution
    /// overrides only apply to linear problems with additive noise.
    pub fn for_measurement(&self) -> Self {
        let mut cfg = self.clone();
        let linear = matches!(self.problem.f, FMap::Zero) && matches!(self.problem.g, GMap::AdditiveIdentity | GMap::ZeroNoise);
        if !linear {
            return cfg;
        }
        cfg.discretization.modes = self.measurement.modes.unwrap_or(self.discretization.modes);
        cfg.discretization.steps = self.measurement.steps.unwrap_or(self.discretization.steps);
        cfg
    }

    pub fn basis(&self) -> Arc<crate::spectral::SpectralBasis> {
        Arc::new(crate::spectral::SpectralBasis::new(self.discretization.modes))
    }
}

fn padded(mut v: Vec<f64>, n: usize) -> Vec<f64> {
    if v.len() == 1 {
        v = vec![v[0]; n];
    }
    v.resize(n.max(v.len()), 0.0);
    v
}
