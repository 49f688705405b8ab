//! Q-Wiener increments in the eigenbasis of A, Hilbert-Schmidt norms, and the
//! stochastic convolution `W_S(t) = ∫₀ᵗ S(t−σ) G dW(σ)` for diagonal `G`.
//!
//! All covariances are diagonal in the eigenbasis: `q_k` is the variance rate
//! of mode `k`. White noise is `q_k ≡ 1` on the truncated basis.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use thiserror::Error;

use crate::fit;
use crate::grid::TimeGrid;
use crate::rng::{normals, Stream};
use crate::spectral::{ResolventBank, SpectralBasis, SpectralField};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NoiseError {
    #[error("noise grid does not match the resolvent bank grid")]
    GridMismatch,
    #[error("stochastic convolution needs a uniform grid")]
    NonUniformGrid,
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),
    #[error("expected {want} modes, got {got}")]
    ModeMismatch { got: usize, want: usize },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum CovarianceSpec {
    White,
    /// `q_k = λ_k^{−γ}`.
    PowerDiagonal { gamma: f64 },
    CustomDiagonal { q: Vec<f64> },
}

impl CovarianceSpec {
    pub fn validate(&self) -> Result<(), NoiseError> {
        match self {
            CovarianceSpec::White => Ok(()),
            CovarianceSpec::PowerDiagonal { gamma } if gamma.is_finite() => Ok(()),
            CovarianceSpec::PowerDiagonal { gamma } => Err(NoiseError::InvalidCovariance(format!("gamma = {gamma}"))),
            CovarianceSpec::CustomDiagonal { q } => {
                if q.iter().all(|v| v.is_finite() && *v >= 0.0) {
                    Ok(())
                } else {
                    Err(NoiseError::InvalidCovariance("q_k must be finite and ≥ 0".into()))
                }
            }
        }
    }

    /// `q_k` for the first `modes` eigenvalues.
    pub fn weights(&self, basis: &SpectralBasis, modes: usize) -> Result<Vec<f64>, NoiseError> {
        self.validate()?;
        let lam = &basis.eigenvalues()[..modes.min(basis.modes())];
        if modes > basis.modes() {
            return Err(NoiseError::ModeMismatch {
                got: modes,
                want: basis.modes(),
            });
        }
        Ok(match self {
            CovarianceSpec::White => vec![1.0; modes],
            CovarianceSpec::PowerDiagonal { gamma } => lam.iter().map(|l| l.powf(-gamma)).collect(),
            CovarianceSpec::CustomDiagonal { q } => (0..modes).map(|i| q.get(i).copied().unwrap_or(0.0)).collect(),
        })
    }

    /// Trace of `Q` on the untruncated basis is finite.
    pub fn is_trace_class(&self) -> bool {
        match self {
            CovarianceSpec::White => false,
            CovarianceSpec::PowerDiagonal { gamma } => *gamma > 0.5,
            CovarianceSpec::CustomDiagonal { .. } => true,
        }
    }
}

/// Increments `ΔW_{k,i}` with variance `q_k Δt_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub seed: u64,
    pub path: u64,
    pub grid: Arc<TimeGrid>,
    pub modes: usize,
    /// Mode-major: `increments[k·steps + i]`.
    increments: Vec<f64>,
}

impl NoisePath {
    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    /// Increments of mode `k` (0-based) over all steps.
    pub fn mode(&self, k: usize) -> &[f64] {
        let n = self.steps();
        &self.increments[k * n..(k + 1) * n]
    }

    pub fn mode_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.steps();
        &mut self.increments[k * n..(k + 1) * n]
    }

    /// Increment over step `i` as a field.
    pub fn step_field(&self, basis: Arc<SpectralBasis>, i: usize) -> SpectralField {
        let mut f = SpectralField::zero(basis);
        for k in 0..self.modes.min(f.coeffs.len()) {
            f.coeffs[k] = self.mode(k)[i];
        }
        f
    }
}

/// Draws all increments of one path. Each value depends only on
/// `(seed, path, mode, step)`.
pub fn sample_increments(
    cov: &CovarianceSpec,
    basis: &SpectralBasis,
    grid: Arc<TimeGrid>,
    seed: u64,
    path: u64,
    modes: usize,
) -> Result<NoisePath, NoiseError> {
    let q = cov.weights(basis, modes)?;
    let n = grid.steps();
    let mut increments = vec![0.0; modes * n];
    for (k, &qk) in q.iter().enumerate() {
        if qk == 0.0 {
            continue;
        }
        for (i, z) in normals(seed, Stream::Increments, path, k as u32).take(n).enumerate() {
            increments[k * n + i] = (qk * grid.dt(i + 1)).sqrt() * z;
        }
    }
    Ok(NoisePath {
        seed,
        path,
        grid,
        modes,
        increments,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HsNormReport {
    pub value: f64,
    /// `(n, partial sum of squares up to mode n)` at n = 1, 2, 4, …, N.
    pub partial_sums: Vec<(usize, f64)>,
    /// Fitted `p` in `term_k ~ k^p` over the upper half of the modes.
    pub tail_exponent: f64,
    pub converges: bool,
}

/// `‖T‖_{L⁰_{2,r_w}} = (Σ_k q_k λ_k^{r_w} T_k²)^{1/2}` for a diagonal `T`, with
/// a convergence verdict for the untruncated series from the power-law tail
/// of the terms (`λ_k ~ k²`).
pub fn hs_norm(op_diag: &[f64], r_w: f64, cov: &CovarianceSpec, basis: &SpectralBasis) -> Result<HsNormReport, NoiseError> {
    let n = op_diag.len();
    let q = cov.weights(basis, n)?;
    let lam = basis.eigenvalues();
    let terms: Vec<f64> = (0..n).map(|k| q[k] * lam[k].powf(r_w) * op_diag[k] * op_diag[k]).collect();
    let mut partial_sums = Vec::new();
    let mut acc = 0.0;
    let mut next = 1;
    for (k, t) in terms.iter().enumerate() {
        acc += t;
        if k + 1 == next || k + 1 == n {
            partial_sums.push((k + 1, acc));
            next *= 2;
        }
    }
    let lo = n / 2;
    let ks: Vec<f64> = (lo..n).filter(|&k| terms[k] > 0.0).map(|k| (k + 1) as f64).collect();
    let ts: Vec<f64> = (lo..n).filter(|&k| terms[k] > 0.0).map(|k| terms[k]).collect();
    let tail_exponent = if ks.len() >= 2 {
        fit::loglog(&ks, &ts).map_or(f64::NAN, |f| f.slope)
    } else {
        f64::NEG_INFINITY
    };
    Ok(HsNormReport {
        value: acc.sqrt(),
        partial_sums,
        tail_exponent,
        converges: tail_exponent < -1.0,
    })
}

/// How `s(t_j − ·)` is sampled against the increment over `[t_i, t_{i+1}]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ItoRule {
    /// `s(t_j − t_i)`.
    #[default]
    LeftPoint,
    /// `s(t_j − t_i − Δt/2)`, linearly interpolated.
    MidpointShift,
}

/// Lag weights `a_m`, `m = 0..=N`, of the stochastic sum for one mode
/// (`a_0` unused).
pub fn lag_weights(s: &[f64], rule: ItoRule) -> Vec<f64> {
    let mut a = vec![0.0; s.len()];
    for m in 1..s.len() {
        a[m] = match rule {
            ItoRule::LeftPoint => s[m],
            ItoRule::MidpointShift => 0.5 * (s[m] + s[m - 1]),
        };
    }
    a
}

/// Causal convolutions `y_j = Σ_{i<j} a_{j−i} x_i`, `j = 0..=N`, by FFT.
/// Round-off spreads to all `j`, so a change in `x_i` moves `y_j` for
/// `j ≤ i` at the ulp level; use direct sums where exact causality matters.
pub struct CausalConvolver {
    steps: usize,
    size: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CausalConvolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CausalConvolver").field("steps", &self.steps).finish()
    }
}

impl CausalConvolver {
    pub fn new(steps: usize) -> Self {
        let size = (2 * (steps + 1)).next_power_of_two();
        let mut planner = FftPlanner::new();
        Self {
            steps,
            size,
            fwd: planner.plan_fft_forward(size),
            inv: planner.plan_fft_inverse(size),
        }
    }

    /// Spectrum of lag weights `a_0..=a_N`.
    pub fn kernel(&self, a: &[f64]) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.size];
        for (m, &v) in a.iter().enumerate().take(self.steps + 1).skip(1) {
            buf[m] = Complex64::new(v, 0.0);
        }
        self.fwd.process(&mut buf);
        buf
    }

    /// `y_j` for `j = 0..=N` given `x_0..x_{N−1}`.
    pub fn apply(&self, kernel: &[Complex64], x: &[f64]) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.size];
        for (i, &v) in x.iter().enumerate().take(self.steps) {
            buf[i] = Complex64::new(v, 0.0);
        }
        self.fwd.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(kernel) {
            *b *= k;
        }
        self.inv.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        let mut y: Vec<f64> = (0..=self.steps).map(|j| buf[j].re * scale).collect();
        y[0] = 0.0;
        y
    }
}

/// `W_S` at every grid node, time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionPath {
    pub grid: Arc<TimeGrid>,
    pub modes: usize,
    /// `values[j·modes + k]`.
    pub values: Vec<f64>,
}

impl ConvolutionPath {
    pub fn at(&self, j: usize) -> &[f64] {
        &self.values[j * self.modes..(j + 1) * self.modes]
    }

    pub fn field(&self, basis: Arc<SpectralBasis>, j: usize) -> SpectralField {
        SpectralField {
            basis,
            coeffs: self.at(j).to_vec(),
        }
    }
}

fn check_grids(bank: &ResolventBank, grid: &Arc<TimeGrid>) -> Result<(), NoiseError> {
    if !(Arc::ptr_eq(&bank.grid, grid) || *bank.grid == **grid) {
        return Err(NoiseError::GridMismatch);
    }
    if !grid.is_uniform() {
        return Err(NoiseError::NonUniformGrid);
    }
    Ok(())
}

/// `(W_S)_k(t_j) = Σ_{i<j} a_{k,j−i} g_k ΔW_{k,i}` for every node and mode.
pub fn stochastic_convolution(
    bank: &ResolventBank,
    noise: &NoisePath,
    g_diag: &[f64],
    rule: ItoRule,
) -> Result<ConvolutionPath, NoiseError> {
    check_grids(bank, &noise.grid)?;
    let modes = bank.modes().min(noise.modes);
    if g_diag.len() < modes {
        return Err(NoiseError::ModeMismatch {
            got: g_diag.len(),
            want: modes,
        });
    }
    let n = noise.steps();
    let conv = CausalConvolver::new(n);
    let per_mode: Vec<Vec<f64>> = (0..modes)
        .into_par_iter()
        .map(|k| {
            if g_diag[k] == 0.0 {
                return vec![0.0; n + 1];
            }
            let a = lag_weights(&bank.tables[k].s, rule);
            let x: Vec<f64> = noise.mode(k).iter().map(|v| g_diag[k] * v).collect();
            conv.apply(&conv.kernel(&a), &x)
        })
        .collect();
    let mut values = vec![0.0; (n + 1) * modes];
    for (k, col) in per_mode.iter().enumerate() {
        for j in 0..=n {
            values[j * modes + k] = col[j];
        }
    }
    Ok(ConvolutionPath {
        grid: Arc::clone(&noise.grid),
        modes,
        values,
    })
}

/// `(W_S)_k(t_j)` at a single node by direct summation.
pub fn stochastic_convolution_at(
    bank: &ResolventBank,
    noise: &NoisePath,
    g_diag: &[f64],
    rule: ItoRule,
    j: usize,
) -> Result<Vec<f64>, NoiseError> {
    check_grids(bank, &noise.grid)?;
    let modes = bank.modes().min(noise.modes);
    Ok((0..modes)
        .map(|k| {
            let a = lag_weights(&bank.tables[k].s, rule);
            let dw = noise.mode(k);
            g_diag[k] * (0..j).map(|i| a[j - i] * dw[i]).sum::<f64>()
        })
        .collect())
}

/// Exact `E‖W_S(t_j)‖²` of the discrete scheme:
/// `Σ_k q_k g_k² Σ_{i<j} a_{k,j−i}² Δt`.
pub fn ito_second_moment(
    bank: &ResolventBank,
    cov: &CovarianceSpec,
    g_diag: &[f64],
    rule: ItoRule,
    j: usize,
) -> Result<f64, NoiseError> {
    let h = bank
        .grid
        .uniform_step()
        .ok_or(NoiseError::NonUniformGrid)?;
    let q = cov.weights(&bank.basis, bank.modes())?;
    Ok((0..bank.modes())
        .map(|k| {
            let a = lag_weights(&bank.tables[k].s, rule);
            q[k] * g_diag[k] * g_diag[k] * h * (1..=j).map(|m| a[m] * a[m]).sum::<f64>()
        })
        .sum())
}

/// Exact joint law of `(W_S)_k` at chosen nodes: per mode a Gaussian vector
/// with the covariance of the discrete Itô sum, sampled through its Cholesky
/// factor. Equal in law to [`stochastic_convolution`] restricted to the nodes.
#[derive(Debug, Clone)]
pub struct MarginalSampler {
    pub nodes: Vec<usize>,
    pub modes: usize,
    /// Per mode, packed lower triangle of the covariance.
    cov: Vec<Vec<f64>>,
    chol: Vec<Vec<f64>>,
}

fn tri(a: usize, b: usize) -> usize {
    let (i, j) = if a >= b { (a, b) } else { (b, a) };
    i * (i + 1) / 2 + j
}

/// Cholesky of a packed positive semidefinite matrix; columns with a
/// vanishing pivot are zeroed.
fn cholesky_psd(c: &[f64], m: usize) -> Vec<f64> {
    let mut l = vec![0.0; c.len()];
    let scale = (0..m).map(|i| c[tri(i, i)]).fold(0.0, f64::max);
    for j in 0..m {
        let mut d = c[tri(j, j)];
        for p in 0..j {
            d -= l[tri(j, p)] * l[tri(j, p)];
        }
        if d <= 1e-13 * scale {
            continue;
        }
        let d = d.sqrt();
        l[tri(j, j)] = d;
        for i in j + 1..m {
            let mut v = c[tri(i, j)];
            for p in 0..j {
                v -= l[tri(i, p)] * l[tri(j, p)];
            }
            l[tri(i, j)] = v / d;
        }
    }
    l
}

impl MarginalSampler {
    pub fn new(
        bank: &ResolventBank,
        cov: &CovarianceSpec,
        g_diag: &[f64],
        nodes: &[usize],
        rule: ItoRule,
    ) -> Result<Self, NoiseError> {
        let h = bank
            .grid
            .uniform_step()
            .ok_or(NoiseError::NonUniformGrid)?;
        let modes = bank.modes();
        if g_diag.len() < modes {
            return Err(NoiseError::ModeMismatch {
                got: g_diag.len(),
                want: modes,
            });
        }
        if nodes.iter().any(|&j| j > bank.grid.steps()) {
            return Err(NoiseError::Invalid("observation node beyond the grid".into()));
        }
        let q = cov.weights(&bank.basis, modes)?;
        let m = nodes.len();
        // Cov(W(t_A), W(t_B)) = q g² Δt Σ_{l=1}^{min(A,B)} a_l a_{l+|B−A|}:
        // one running sum per distinct node distance.
        let mut needed: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for a in 0..m {
            for b in 0..=a {
                let (lo, hi) = (nodes[a].min(nodes[b]), nodes[a].max(nodes[b]));
                needed.entry(hi - lo).or_default().push(lo);
            }
        }
        for v in needed.values_mut() {
            v.sort_unstable();
            v.dedup();
        }
        let covs: Vec<Vec<f64>> = (0..modes)
            .into_par_iter()
            .map(|k| {
                let a = lag_weights(&bank.tables[k].s, rule);
                let w = q[k] * g_diag[k] * g_diag[k] * h;
                let mut lookup: BTreeMap<(usize, usize), f64> = BTreeMap::new();
                for (&d, los) in &needed {
                    let mut acc = 0.0;
                    let mut l = 0;
                    for &lo in los {
                        while l < lo {
                            l += 1;
                            acc += a[l] * a[l + d];
                        }
                        lookup.insert((d, lo), w * acc);
                    }
                }
                let mut c = vec![0.0; m * (m + 1) / 2];
                for x in 0..m {
                    for y in 0..=x {
                        let (lo, hi) = (nodes[x].min(nodes[y]), nodes[x].max(nodes[y]));
                        c[tri(x, y)] = lookup[&(hi - lo, lo)];
                    }
                }
                c
            })
            .collect();
        let chol = covs.iter().map(|c| cholesky_psd(c, m)).collect();
        Ok(Self {
            nodes: nodes.to_vec(),
            modes,
            cov: covs,
            chol,
        })
    }

    /// Exact `Cov((W_S)_k(t_{nodes[a]}), (W_S)_k(t_{nodes[b]}))`.
    pub fn covariance(&self, k: usize, a: usize, b: usize) -> f64 {
        self.cov[k][tri(a, b)]
    }

    /// One draw, observation-major: `out[a·modes + k]`.
    pub fn sample(&self, seed: u64, path: u64) -> Vec<f64> {
        let m = self.nodes.len();
        let mut out = vec![0.0; m * self.modes];
        let mut z = vec![0.0; m];
        for k in 0..self.modes {
            for (za, g) in z.iter_mut().zip(normals(seed, Stream::Marginal, path, k as u32)) {
                *za = g;
            }
            let l = &self.chol[k];
            for a in 0..m {
                let row = a * (a + 1) / 2;
                let mut v = 0.0;
                for b in 0..=a {
                    v += l[row + b] * z[b];
                }
                out[a * self.modes + k] = v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::spectral::build_resolvent_bank;

    fn setup(modes: usize, steps: usize) -> (Arc<SpectralBasis>, Arc<TimeGrid>, ResolventBank) {
        let basis = Arc::new(SpectralBasis::new(modes));
        let grid = Arc::new(TimeGrid::uniform(1.0, steps).unwrap());
        let bank = build_resolvent_bank(&KernelSpec::riesz(1.5), Arc::clone(&basis), Arc::clone(&grid)).unwrap();
        (basis, grid, bank)
    }

    #[test]
    fn increment_variance_and_zero_modes() {
        let basis = SpectralBasis::new(3);
        let grid = Arc::new(TimeGrid::uniform(1.0, 1000).unwrap());
        let cov = CovarianceSpec::CustomDiagonal { q: vec![2.0, 0.0, 0.5] };
        let mut sums = [0.0; 3];
        let paths = 100;
        for p in 0..paths {
            let n = sample_increments(&cov, &basis, Arc::clone(&grid), 9, p, 3).unwrap();
            for (k, s) in sums.iter_mut().enumerate() {
                *s += n.mode(k).iter().map(|v| v * v / 1e-3).sum::<f64>();
            }
        }
        let draws = (paths * 1000) as f64;
        for (k, q) in [2.0, 0.0, 0.5].iter().enumerate() {
            let mean = sums[k] / draws;
            assert!((mean - q).abs() <= 3.0 * (2.0 / draws).sqrt() * q + 1e-300, "mode {k}: {mean}");
        }
        let a = sample_increments(&cov, &basis, Arc::clone(&grid), 9, 4, 3).unwrap();
        let b = sample_increments(&cov, &basis, grid, 9, 4, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.mode(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cross_covariance_vanishes() {
        let basis = SpectralBasis::new(2);
        let grid = Arc::new(TimeGrid::uniform(1.0, 1000).unwrap());
        let mut acc = 0.0;
        let paths = 100;
        for p in 0..paths {
            let n = sample_increments(&CovarianceSpec::White, &basis, Arc::clone(&grid), 5, p, 2).unwrap();
            acc += n.mode(0).iter().zip(n.mode(1)).map(|(x, y)| x * y / 1e-3).sum::<f64>();
            acc += n.mode(0).windows(2).map(|w| w[0] * w[1] / 1e-3).sum::<f64>();
        }
        let draws = (2 * paths * 1000) as f64;
        assert!((acc / draws).abs() < 4.0 / draws.sqrt());
    }

    #[test]
    fn hs_norm_cases() {
        let basis = SpectralBasis::new(512);
        let ones = vec![1.0; 512];
        let rho = 1.5;
        let conv = hs_norm(&ones, 2.0 * (-0.3 - 1.0 + 1.0 / rho) / 2.0, &CovarianceSpec::White, &basis).unwrap();
        assert!(conv.converges, "{}", conv.tail_exponent);
        let div = hs_norm(&ones, 0.0, &CovarianceSpec::White, &basis).unwrap();
        assert!(!div.converges);
        assert!((div.value * div.value - 512.0).abs() < 1e-9);
        let mut e1 = vec![0.0; 512];
        e1[0] = 1.0;
        let single = hs_norm(&e1, 0.7, &CovarianceSpec::PowerDiagonal { gamma: 1.0 }, &basis).unwrap();
        let lam1 = basis.eigenvalues()[0];
        assert!((single.value - (lam1.powf(-1.0)).sqrt() * lam1.powf(0.35)).abs() < 1e-14);
        let pd = hs_norm(&ones, 0.0, &CovarianceSpec::PowerDiagonal { gamma: 0.8 }, &basis).unwrap();
        let direct: f64 = basis.eigenvalues().iter().map(|l| l.powf(-0.8)).sum();
        assert!((pd.value * pd.value - direct).abs() < 1e-14 * direct);
    }

    #[test]
    fn convolution_fft_matches_direct_and_is_causal() {
        let (basis, grid, bank) = setup(4, 64);
        let cov = CovarianceSpec::PowerDiagonal { gamma: 0.5 };
        let noise = sample_increments(&cov, &basis, Arc::clone(&grid), 3, 0, 4).unwrap();
        let g = [1.0, 0.5, -2.0, 1.0];
        for rule in [ItoRule::LeftPoint, ItoRule::MidpointShift] {
            let path = stochastic_convolution(&bank, &noise, &g, rule).unwrap();
            assert!(path.at(0).iter().all(|&v| v == 0.0));
            for j in [1, 17, 64] {
                let direct = stochastic_convolution_at(&bank, &noise, &g, rule, j).unwrap();
                for (a, b) in path.at(j).iter().zip(&direct) {
                    assert!((a - b).abs() < 1e-13, "{a} {b}");
                }
            }
        }
        let mut bumped = noise.clone();
        bumped.mode_mut(2)[30] += 1.0;
        let p0 = stochastic_convolution(&bank, &noise, &g, ItoRule::LeftPoint).unwrap();
        let p1 = stochastic_convolution(&bank, &bumped, &g, ItoRule::LeftPoint).unwrap();
        for j in 0..=30 {
            for (a, b) in p0.at(j).iter().zip(p1.at(j)) {
                assert!((a - b).abs() < 1e-14);
            }
        }
        assert_ne!(p0.at(31), p1.at(31));
        let zero = stochastic_convolution(&bank, &noise, &[0.0; 4], ItoRule::LeftPoint).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn degenerate_mode_gives_brownian_motion() {
        let basis = Arc::new(SpectralBasis::new(1));
        let grid = Arc::new(TimeGrid::uniform(1.0, 50).unwrap());
        let weights = crate::resolvent::ResolventWeights::new(&KernelSpec::riesz(1.5), Arc::clone(&grid), false).unwrap();
        let bank = ResolventBank {
            basis: Arc::clone(&basis),
            kernel: KernelSpec::riesz(1.5),
            grid: Arc::clone(&grid),
            tables: vec![weights.solve(0.0, true).unwrap()],
        };
        let cov = CovarianceSpec::CustomDiagonal { q: vec![3.0] };
        let noise = sample_increments(&cov, &basis, Arc::clone(&grid), 1, 0, 1).unwrap();
        let w = stochastic_convolution(&bank, &noise, &[1.0], ItoRule::LeftPoint).unwrap();
        let sum: f64 = noise.mode(0).iter().sum();
        assert!((w.at(50)[0] - sum).abs() < 1e-12);
        assert!((ito_second_moment(&bank, &cov, &[1.0], ItoRule::LeftPoint, 50).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn marginal_covariance_matches_sum() {
        let (_, _, bank) = setup(3, 40);
        let cov = CovarianceSpec::White;
        let g = [1.0, 1.0, 1.0];
        let nodes = [0, 5, 20, 40, 33];
        let ms = MarginalSampler::new(&bank, &cov, &g, &nodes, ItoRule::LeftPoint).unwrap();
        let h = 1.0 / 40.0;
        for k in 0..3 {
            let s = &bank.tables[k].s;
            for a in 0..nodes.len() {
                for b in 0..nodes.len() {
                    let (ja, jb) = (nodes[a], nodes[b]);
                    let direct: f64 = (0..ja.min(jb)).map(|i| s[ja - i] * s[jb - i] * h).sum();
                    assert!((ms.covariance(k, a, b) - direct).abs() < 1e-14);
                }
            }
        }
        let total: f64 = (0..3).map(|k| ms.covariance(k, 3, 3)).sum();
        let iso = ito_second_moment(&bank, &cov, &g, ItoRule::LeftPoint, 40).unwrap();
        assert!((total - iso).abs() < 1e-13);
        let x = ms.sample(1, 2);
        assert_eq!(x, ms.sample(1, 2));
        assert!(x[..3].iter().all(|&v| v == 0.0));
    }
}
