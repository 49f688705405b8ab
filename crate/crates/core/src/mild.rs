//! Mild solutions `u(t) = S(t)u₀ + ∫₀ᵗ S(t−σ)F(u)dσ + ∫₀ᵗ S(t−σ)G(u)dW` by
//! Picard iteration on a frozen noise path, with the weighted sup-norm
//! distance `d_n = sup_t e^{−αt}‖u⁽ⁿ⁾(t) − u⁽ⁿ⁻¹⁾(t)‖_{Ḣ^{s₀}}` recorded as a
//! contraction certificate.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::grid::TimeGrid;
use crate::kernel::KernelSpec;
use crate::noise::{sample_increments, stochastic_convolution, CovarianceSpec, ItoRule, NoiseError, NoisePath};
use crate::quad::dot;
use crate::spectral::{hdot_norm, BankOptions, ResolventBank, SpectralBasis, SpectralError, SpectralField};
use crate::transform::SineGrid;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MildError {
    #[error("no contraction at alpha = {alpha}: last ratio {ratio:.3} after {iterations} iterations; increase alpha")]
    NoContraction { alpha: f64, ratio: f64, iterations: usize },
    #[error("transform size mismatch: {points} collocation points for {modes} modes (need ≥ 2N+1)")]
    TransformSizeMismatch { points: usize, modes: usize },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("path {index}: {source}")]
    Path { index: u64, source: Box<MildError> },
}

/// Globally Lipschitz scalar functions for Nemytskii maps, scaled so the
/// stated constant is the Lipschitz constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalarFn {
    Sin,
    ScaledArctan,
}

impl ScalarFn {
    pub fn eval(self, lipschitz: f64, x: f64) -> f64 {
        match self {
            ScalarFn::Sin => lipschitz * x.sin(),
            ScalarFn::ScaledArctan => lipschitz * x.atan(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum FMap {
    Zero,
    DiagonalLinear { c: Vec<f64> },
    Nemytskii { func: ScalarFn, lipschitz: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum GMap {
    ZeroNoise,
    AdditiveIdentity,
    /// `(G(u)w)_k = g_k u_k w_k`.
    DiagonalMultiplicative { g: Vec<f64> },
    /// `(G(u)w)(x) = f(u(x)) w(x)`.
    NemytskiiMultiplicative { func: ScalarFn, lipschitz: f64 },
}

impl FMap {
    pub fn lipschitz(&self) -> f64 {
        match self {
            FMap::Zero => 0.0,
            FMap::DiagonalLinear { c } => c.iter().fold(0.0, |m, v| m.max(v.abs())),
            FMap::Nemytskii { lipschitz, .. } => lipschitz.abs(),
        }
    }
}

impl GMap {
    pub fn lipschitz(&self) -> f64 {
        match self {
            GMap::ZeroNoise | GMap::AdditiveIdentity => 0.0,
            GMap::DiagonalMultiplicative { g } => g.iter().fold(0.0, |m, v| m.max(v.abs())),
            GMap::NemytskiiMultiplicative { lipschitz, .. } => lipschitz.abs(),
        }
    }
}

/// Physical-space evaluation of Nemytskii maps on `M` interior points.
#[derive(Debug)]
pub struct Collocation {
    modes: usize,
    grid: SineGrid,
}

impl Collocation {
    pub fn new(modes: usize, points: usize) -> Result<Self, MildError> {
        if points < 2 * modes + 1 {
            return Err(MildError::TransformSizeMismatch { points, modes });
        }
        Ok(Self {
            modes,
            grid: SineGrid::new(points),
        })
    }

    /// `M = 2N + 1`.
    pub fn oversampled(modes: usize) -> Self {
        Self {
            modes,
            grid: SineGrid::new(2 * modes + 1),
        }
    }

    pub fn to_values(&self, coeffs: &[f64]) -> Vec<f64> {
        self.grid.synthesize(coeffs)
    }

    pub fn to_coeffs(&self, values: &[f64]) -> Vec<f64> {
        self.grid.analyze(values, self.modes)
    }
}

/// `F(f)` in spectral coordinates.
pub fn apply_f(map: &FMap, f: &[f64], col: &Collocation) -> Vec<f64> {
    match map {
        FMap::Zero => vec![0.0; f.len()],
        FMap::DiagonalLinear { c } => f.iter().zip(c).map(|(x, c)| c * x).collect(),
        FMap::Nemytskii { func, lipschitz } => {
            let v: Vec<f64> = col.to_values(f).iter().map(|&x| func.eval(*lipschitz, x)).collect();
            col.to_coeffs(&v)
        }
    }
}

/// `G(u) dw` in spectral coordinates.
pub fn apply_g(map: &GMap, u: &[f64], dw: &[f64], col: &Collocation) -> Vec<f64> {
    match map {
        GMap::ZeroNoise => vec![0.0; u.len()],
        GMap::AdditiveIdentity => dw.to_vec(),
        GMap::DiagonalMultiplicative { g } => (0..u.len()).map(|k| g[k] * u[k] * dw[k]).collect(),
        GMap::NemytskiiMultiplicative { func, lipschitz } => {
            let uv = col.to_values(u);
            let wv = col.to_values(dw);
            let prod: Vec<f64> = uv.iter().zip(&wv).map(|(&x, &w)| func.eval(*lipschitz, x) * w).collect();
            col.to_coeffs(&prod)
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub kernel: KernelSpec,
    pub basis: Arc<SpectralBasis>,
    pub cov: CovarianceSpec,
    pub f: FMap,
    pub g: GMap,
    pub u0: SpectralField,
    pub horizon: f64,
    /// Regularity index `r < 1`.
    pub r: f64,
    pub rho: f64,
    /// Moment order.
    pub p: f64,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<(), MildError> {
        if !(self.r < 1.0) {
            return Err(MildError::InvalidProblem(format!("r = {} must be < 1", self.r)));
        }
        if !(self.rho > 1.0 && self.rho < 2.0) {
            return Err(MildError::InvalidProblem(format!("rho = {} must lie in (1, 2)", self.rho)));
        }
        if !(self.p >= 2.0) {
            return Err(MildError::InvalidProblem(format!("p = {} must be ≥ 2", self.p)));
        }
        if self.u0.coeffs.len() != self.basis.modes() {
            return Err(MildError::InvalidProblem("u0 has the wrong number of modes".into()));
        }
        if let FMap::DiagonalLinear { c } = &self.f {
            if c.len() < self.basis.modes() {
                return Err(MildError::InvalidProblem("F coefficients shorter than the basis".into()));
            }
        }
        if let GMap::DiagonalMultiplicative { g } = &self.g {
            if g.len() < self.basis.modes() {
                return Err(MildError::InvalidProblem("G coefficients shorter than the basis".into()));
            }
        }
        self.cov.validate()?;
        Ok(())
    }

    /// `s₀ = r − 1 + 1/ρ`.
    pub fn s0(&self) -> f64 {
        self.r - 1.0 + 1.0 / self.rho
    }

    /// `α₀ = 4(C_F + C_G)² max(1, T)`, at least one.
    pub fn alpha0(&self) -> f64 {
        let c = self.f.lipschitz() + self.g.lipschitz();
        (4.0 * c * c * self.horizon.max(1.0)).max(1.0)
    }
}

/// Discrete solution path, time-major: `values[j·N + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPath {
    pub grid: Arc<TimeGrid>,
    pub modes: usize,
    pub values: Vec<f64>,
}

impl SolutionPath {
    pub fn zeros(grid: Arc<TimeGrid>, modes: usize) -> Self {
        let n = grid.steps() + 1;
        Self {
            grid,
            modes,
            values: vec![0.0; n * modes],
        }
    }

    pub fn at(&self, j: usize) -> &[f64] {
        &self.values[j * self.modes..(j + 1) * self.modes]
    }

    pub fn field(&self, basis: Arc<SpectralBasis>, j: usize) -> SpectralField {
        SpectralField {
            basis,
            coeffs: self.at(j).to_vec(),
        }
    }

    /// `S(t_j)u₀` at every node.
    pub fn free_evolution(bank: &ResolventBank, u0: &[f64]) -> Self {
        let mut p = Self::zeros(Arc::clone(&bank.grid), bank.modes());
        for j in 0..=bank.grid.steps() {
            for k in 0..bank.modes() {
                p.values[j * p.modes + k] = bank.tables[k].s[j] * u0[k];
            }
        }
        p
    }

    /// `sup_j w(t_j)‖self(t_j) − other(t_j)‖_{Ḣ^s}`.
    pub fn distance(&self, other: &Self, basis: &Arc<SpectralBasis>, s: f64, weight: impl Fn(f64) -> f64) -> f64 {
        let t = self.grid.nodes();
        (0..t.len())
            .map(|j| {
                let diff: Vec<f64> = self.at(j).iter().zip(other.at(j)).map(|(a, b)| a - b).collect();
                weight(t[j]) * hdot_norm(s, &SpectralField { basis: Arc::clone(basis), coeffs: diff })
            })
            .fold(0.0, f64::max)
    }
}

/// Per-mode reversed lag weights for the drift (`Δt(s_m + s_{m−1})/2`) and
/// the stochastic sum (`s_m`).
#[derive(Debug, Clone)]
pub struct ConvolutionWeights {
    steps: usize,
    drift_rev: Vec<Vec<f64>>,
    noise_rev: Vec<Vec<f64>>,
}

impl ConvolutionWeights {
    pub fn new(bank: &ResolventBank) -> Result<Self, MildError> {
        let h = bank.grid.uniform_step().ok_or(NoiseError::NonUniformGrid)?;
        let n = bank.grid.steps();
        let mut drift_rev = Vec::with_capacity(bank.modes());
        let mut noise_rev = Vec::with_capacity(bank.modes());
        for tab in &bank.tables {
            let s = &tab.s;
            // rev[N − m] holds the weight of lag m = 1..N.
            let mut d = vec![0.0; n];
            let mut w = vec![0.0; n];
            for m in 1..=n {
                d[n - m] = 0.5 * h * (s[m] + s[m - 1]);
                w[n - m] = s[m];
            }
            drift_rev.push(d);
            noise_rev.push(w);
        }
        Ok(Self {
            steps: n,
            drift_rev,
            noise_rev,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub alpha: f64,
    pub s0: f64,
    /// Weighted distances `d_1, d_2, …`.
    pub distances: Vec<f64>,
    /// Unweighted sup distances, same indexing.
    pub plain_distances: Vec<f64>,
    /// Largest `d_{n+1}/d_n` after the first step, over steps with `d_n`
    /// above round-off.
    pub ratio: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 30 }
    }
}

/// Everything a Picard run needs besides the noise path.
pub struct Solver {
    pub problem: ProblemSpec,
    pub bank: ResolventBank,
    weights: ConvolutionWeights,
    col: Collocation,
}

impl std::fmt::Debug for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Solver").field("problem", &self.problem).finish()
    }
}

impl Solver {
    /// With `strict = false`, modes flagged by the coarseness heuristic are
    /// kept (see [`ResolventBank::coarse_modes`]).
    pub fn new(problem: ProblemSpec, grid: Arc<TimeGrid>, strict: bool) -> Result<Self, MildError> {
        problem.validate()?;
        if (grid.horizon() - problem.horizon).abs() > 1e-12 * problem.horizon {
            return Err(MildError::InvalidProblem("grid horizon differs from T".into()));
        }
        let bank = ResolventBank::build(
            &problem.kernel,
            Arc::clone(&problem.basis),
            grid,
            BankOptions {
                derivatives: false,
                strict,
            },
        )?;
        Self::with_bank(problem, bank)
    }

    pub fn with_bank(problem: ProblemSpec, bank: ResolventBank) -> Result<Self, MildError> {
        problem.validate()?;
        let weights = ConvolutionWeights::new(&bank)?;
        let col = Collocation::oversampled(bank.modes());
        Ok(Self {
            problem,
            bank,
            weights,
            col,
        })
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.bank.grid
    }

    pub fn noise(&self, seed: u64, path: u64) -> Result<NoisePath, MildError> {
        Ok(sample_increments(
            &self.problem.cov,
            &self.problem.basis,
            Arc::clone(&self.bank.grid),
            seed,
            path,
            self.bank.modes(),
        )?)
    }

    /// One application of `Φ_{u₀}` with frozen increments.
    pub fn phi(&self, u: &SolutionPath, noise: &NoisePath) -> SolutionPath {
        let n = self.weights.steps;
        let modes = self.bank.modes();
        let drift = !matches!(self.problem.f, FMap::Zero);
        let diffusion = !matches!(self.problem.g, GMap::ZeroNoise);
        // Mode-major inputs F(u(t_i)) and G(u(t_i))ΔW_i, i = 0..N−1.
        let mut fx = vec![0.0; if drift { modes * n } else { 0 }];
        let mut gx = vec![0.0; if diffusion { modes * n } else { 0 }];
        let mut dw = vec![0.0; modes];
        for i in 0..n {
            let ui = u.at(i);
            if drift {
                for (k, v) in apply_f(&self.problem.f, ui, &self.col).into_iter().enumerate() {
                    fx[k * n + i] = v;
                }
            }
            if diffusion {
                for (k, d) in dw.iter_mut().enumerate() {
                    *d = if k < noise.modes { noise.mode(k)[i] } else { 0.0 };
                }
                for (k, v) in apply_g(&self.problem.g, ui, &dw, &self.col).into_iter().enumerate() {
                    gx[k * n + i] = v;
                }
            }
        }
        let u0 = &self.problem.u0.coeffs;
        let cols: Vec<Vec<f64>> = (0..modes)
            .into_par_iter()
            .map(|k| {
                let s = &self.bank.tables[k].s;
                let (dr, nr) = (&self.weights.drift_rev[k], &self.weights.noise_rev[k]);
                (0..=n)
                    .map(|j| {
                        let mut v = s[j] * u0[k];
                        if drift {
                            v += dot(&dr[n - j..], &fx[k * n..k * n + j]);
                        }
                        if diffusion {
                            v += dot(&nr[n - j..], &gx[k * n..k * n + j]);
                        }
                        v
                    })
                    .collect()
            })
            .collect();
        let mut out = SolutionPath::zeros(Arc::clone(&self.bank.grid), modes);
        for (k, col) in cols.iter().enumerate() {
            for (j, v) in col.iter().enumerate() {
                out.values[j * modes + k] = *v;
            }
        }
        out
    }

    /// Picard iteration from `start` until both the weighted and the plain
    /// sup distance fall below `tol`.
    pub fn picard_from(
        &self,
        start: SolutionPath,
        noise: &NoisePath,
        alpha: f64,
        opts: PicardOptions,
    ) -> Result<(SolutionPath, Certificate), MildError> {
        let s0 = self.problem.s0();
        let basis = &self.problem.basis;
        let mut u = start;
        let mut cert = Certificate {
            alpha,
            s0,
            distances: Vec::new(),
            plain_distances: Vec::new(),
            ratio: 0.0,
            iterations: 0,
            converged: false,
        };
        for it in 1..=opts.max_iter {
            let next = self.phi(&u, noise);
            let d = next.distance(&u, basis, s0, |t| (-alpha * t).exp());
            let plain = next.distance(&u, basis, s0, |_| 1.0);
            cert.distances.push(d);
            cert.plain_distances.push(plain);
            cert.iterations = it;
            u = next;
            if d < opts.tol && plain < opts.tol {
                cert.converged = true;
                break;
            }
        }
        cert.ratio = contraction_ratio(&cert.distances, opts.tol);
        if !cert.converged || cert.ratio >= 1.0 {
            return Err(MildError::NoContraction {
                alpha,
                ratio: cert.ratio,
                iterations: cert.iterations,
            });
        }
        Ok((u, cert))
    }

    /// Picard iteration from zero on one path.
    pub fn picard_solve(
        &self,
        seed: u64,
        path: u64,
        alpha: f64,
        opts: PicardOptions,
    ) -> Result<(SolutionPath, Certificate), MildError> {
        let noise = self.noise(seed, path)?;
        self.picard_from(SolutionPath::zeros(Arc::clone(&self.bank.grid), self.bank.modes()), &noise, alpha, opts)
    }

    /// Starts at `α₀` and doubles on `NoContraction` up to `2¹⁰α₀`.
    pub fn picard_auto(
        &self,
        noise: &NoisePath,
        opts: PicardOptions,
    ) -> Result<(SolutionPath, Certificate), MildError> {
        let a0 = self.problem.alpha0();
        let mut last = None;
        for e in 0..=10 {
            let alpha = a0 * f64::from(1u32 << e);
            let start = SolutionPath::zeros(Arc::clone(&self.bank.grid), self.bank.modes());
            match self.picard_from(start, noise, alpha, opts) {
                Ok(r) => return Ok(r),
                Err(err @ MildError::NoContraction { .. }) => last = Some(err),
                Err(err) => return Err(err),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    /// `F = 0` with additive noise: the mild solution is `S(t)u₀ + W_S(t)`
    /// and no iteration is needed.
    pub fn is_linear_additive(&self) -> bool {
        matches!(self.problem.f, FMap::Zero) && matches!(self.problem.g, GMap::AdditiveIdentity | GMap::ZeroNoise)
    }

    /// One path. The linear additive case uses the FFT stochastic
    /// convolution and reports a one-step certificate; otherwise Picard runs
    /// at the fixed `alpha` or with automatic selection.
    pub fn solve_path(
        &self,
        seed: u64,
        path: u64,
        alpha: Option<f64>,
        opts: PicardOptions,
    ) -> Result<(SolutionPath, Certificate), MildError> {
        let noise = self.noise(seed, path)?;
        if self.is_linear_additive() {
            let mut u = SolutionPath::free_evolution(&self.bank, &self.problem.u0.coeffs);
            if matches!(self.problem.g, GMap::AdditiveIdentity) {
                let ws = stochastic_convolution(&self.bank, &noise, &vec![1.0; self.bank.modes()], ItoRule::LeftPoint)?;
                for (a, b) in u.values.iter_mut().zip(&ws.values) {
                    *a += b;
                }
            }
            let cert = Certificate {
                alpha: alpha.unwrap_or(0.0),
                s0: self.problem.s0(),
                distances: Vec::new(),
                plain_distances: Vec::new(),
                ratio: 0.0,
                iterations: 0,
                converged: true,
            };
            return Ok((u, cert));
        }
        match alpha {
            Some(a) => self.picard_from(SolutionPath::zeros(Arc::clone(&self.bank.grid), self.bank.modes()), &noise, a, opts),
            None => self.picard_auto(&noise, opts),
        }
    }

    /// Solves paths `0..n_paths` in parallel and keeps only `f(path)` of
    /// each, in path order.
    pub fn ensemble_map<T, M>(
        &self,
        seed: u64,
        n_paths: usize,
        alpha: Option<f64>,
        opts: PicardOptions,
        f: M,
    ) -> Result<Vec<(T, Certificate)>, MildError>
    where
        T: Send,
        M: Fn(&SolutionPath) -> T + Sync,
    {
        let results: Vec<Result<(T, Certificate), MildError>> = (0..n_paths as u64)
            .into_par_iter()
            .map(|p| {
                self.solve_path(seed, p, alpha, opts)
                    .map(|(u, c)| (f(&u), c))
                    .map_err(|e| MildError::Path {
                        index: p,
                        source: Box::new(e),
                    })
            })
            .collect();
        results.into_iter().collect()
    }

    /// Independent paths `0..n_paths`, in parallel, kept in full.
    pub fn ensemble_solve(&self, seed: u64, n_paths: usize, opts: PicardOptions) -> Result<Ensemble, MildError> {
        let (paths, certificates) = self.ensemble_map(seed, n_paths, None, opts, Clone::clone)?.into_iter().unzip();
        Ok(Ensemble {
            basis: Arc::clone(&self.problem.basis),
            grid: Arc::clone(&self.bank.grid),
            paths,
            certificates,
        })
    }
}

/// Largest ratio `d_{n+1}/d_n` over consecutive distances both above the
/// round-off floor `1e−3·tol`, skipping the first step (from the arbitrary
/// initial iterate).
pub fn contraction_ratio(d: &[f64], tol: f64) -> f64 {
    let floor = 1e-3 * tol;
    d.windows(2)
        .skip(1)
        .filter(|w| w[0] > floor && w[1] > floor)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max)
}

/// Solved paths sharing a grid.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub basis: Arc<SpectralBasis>,
    pub grid: Arc<TimeGrid>,
    pub paths: Vec<SolutionPath>,
    pub certificates: Vec<Certificate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpRow {
    pub t: f64,
    pub s_exponent: f64,
    pub empirical_lp_norm: f64,
    pub n_paths: usize,
    pub stderr: f64,
}

impl Ensemble {
    /// `(mean ‖u(t_j)‖^p_{Ḣ^s})^{1/p}` at every node, with the delta-method
    /// standard error.
    pub fn lp_norms(&self, s: f64, p: f64) -> Vec<LpRow> {
        let t = self.grid.nodes();
        let n = self.paths.len() as f64;
        (0..t.len())
            .map(|j| {
                let vals: Vec<f64> = self
                    .paths
                    .iter()
                    .map(|u| hdot_norm(s, &u.field(Arc::clone(&self.basis), j)).powf(p))
                    .collect();
                let mean = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
                let norm = mean.powf(1.0 / p);
                let se_mean = (var / n).sqrt();
                let stderr = if mean > 0.0 { norm * se_mean / (p * mean) } else { 0.0 };
                LpRow {
                    t: t[j],
                    s_exponent: s,
                    empirical_lp_norm: norm,
                    n_paths: self.paths.len(),
                    stderr,
                }
            })
            .collect()
    }
}
