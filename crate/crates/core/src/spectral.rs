//! The Dirichlet Laplacian on (0,1) in its eigenbasis `e_k = √2 sin(kπx)`,
//! `λ_k = (kπ)²`, and the resolvent family `S(t) = Σ s_{λ_k}(t)(·, e_k)e_k`.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::fit::{self, LineFit};
use crate::grid::TimeGrid;
use crate::kernel::KernelSpec;
use crate::resolvent::{ResolventError, ResolventWeights, ScalarResolventTable};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SpectralError {
    #[error("mode {mode} (lambda = {lambda:.6e}): {source}")]
    Mode {
        mode: usize,
        lambda: f64,
        source: ResolventError,
    },
    #[error(transparent)]
    Resolvent(#[from] ResolventError),
    #[error("spectral truncation dominates: the mode-wise maximum sits at k = N for every t in the window")]
    SpectralTruncationDominates,
    #[error("t = {0} is not a grid node")]
    NotANode(f64),
    #[error("field has {got} modes, basis has {want}")]
    ModeMismatch { got: usize, want: usize },
    #[error("bank was built without derivatives")]
    NoDerivatives,
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    eigenvalues: Vec<f64>,
}

impl SpectralBasis {
    pub fn new(modes: usize) -> Self {
        Self {
            eigenvalues: (1..=modes).map(|k| (k as f64 * PI).powi(2)).collect(),
        }
    }

    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `e_k(x)` for `k ≥ 1`.
    pub fn eigenfunction(k: usize, x: f64) -> f64 {
        std::f64::consts::SQRT_2 * (k as f64 * PI * x).sin()
    }
}

/// Coordinates of a function against `e_1, …, e_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub basis: Arc<SpectralBasis>,
    pub coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn new(basis: Arc<SpectralBasis>, coeffs: Vec<f64>) -> Result<Self, SpectralError> {
        if coeffs.len() != basis.modes() {
            return Err(SpectralError::ModeMismatch {
                got: coeffs.len(),
                want: basis.modes(),
            });
        }
        Ok(Self { basis, coeffs })
    }

    pub fn zero(basis: Arc<SpectralBasis>) -> Self {
        let n = basis.modes();
        Self { basis, coeffs: vec![0.0; n] }
    }

    /// `e_k`, 1-based.
    pub fn unit(basis: Arc<SpectralBasis>, k: usize) -> Self {
        let mut f = Self::zero(basis);
        f.coeffs[k - 1] = 1.0;
        f
    }

    fn map(&self, g: impl Fn(usize, f64) -> f64) -> Self {
        Self {
            basis: Arc::clone(&self.basis),
            coeffs: self.coeffs.iter().enumerate().map(|(i, &c)| g(i, c)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.map(|i, c| c + other.coeffs[i])
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|_, c| a * c)
    }

    /// Values at the points `xs`, by direct summation.
    pub fn eval(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter()
            .map(|&x| {
                self.coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c * SpectralBasis::eigenfunction(i + 1, x))
                    .sum()
            })
            .collect()
    }
}

/// `A^s f`.
pub fn frac_power_apply(s: f64, f: &SpectralField) -> SpectralField {
    let lam = f.basis.eigenvalues();
    f.map(|i, c| lam[i].powf(s) * c)
}

/// `‖f‖_{Ḣ^β} = (Σ λ_k^β f_k²)^{1/2}`.
pub fn hdot_norm(beta: f64, f: &SpectralField) -> f64 {
    let lam = f.basis.eigenvalues();
    f.coeffs
        .iter()
        .zip(lam)
        .map(|(c, l)| l.powf(beta) * c * c)
        .sum::<f64>()
        .sqrt()
}

/// One scalar resolvent table per mode, all on one grid.
#[derive(Debug, Clone)]
pub struct ResolventBank {
    pub basis: Arc<SpectralBasis>,
    pub kernel: KernelSpec,
    pub grid: Arc<TimeGrid>,
    pub tables: Vec<ScalarResolventTable>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankOptions {
    pub derivatives: bool,
    /// Reject modes that fail the coarseness heuristic.
    pub strict: bool,
}

impl Default for BankOptions {
    fn default() -> Self {
        Self {
            derivatives: true,
            strict: true,
        }
    }
}

/// Solves the scalar resolvent for every `λ_k`, in parallel over modes.
pub fn build_resolvent_bank(
    kernel: &KernelSpec,
    basis: Arc<SpectralBasis>,
    grid: Arc<TimeGrid>,
) -> Result<ResolventBank, SpectralError> {
    ResolventBank::build(kernel, basis, grid, BankOptions::default())
}

impl ResolventBank {
    pub fn build(
        kernel: &KernelSpec,
        basis: Arc<SpectralBasis>,
        grid: Arc<TimeGrid>,
        opts: BankOptions,
    ) -> Result<Self, SpectralError> {
        let weights = ResolventWeights::new(kernel, Arc::clone(&grid), opts.derivatives)?;
        let tables = basis
            .eigenvalues()
            .par_iter()
            .enumerate()
            .map(|(i, &lambda)| {
                weights.solve(lambda, opts.strict).map_err(|source| SpectralError::Mode {
                    mode: i + 1,
                    lambda,
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            basis,
            kernel: kernel.clone(),
            grid,
            tables,
        })
    }

    pub fn modes(&self) -> usize {
        self.tables.len()
    }

    /// Modes flagged by the coarseness heuristic.
    pub fn coarse_modes(&self) -> Vec<usize> {
        (0..self.modes()).filter(|&i| self.tables[i].coarse).map(|i| i + 1).collect()
    }

    /// Index of the grid node equal to `t`.
    pub fn node_index(&self, t: f64) -> Result<usize, SpectralError> {
        let j = self.grid.nearest(t);
        if (self.grid.nodes()[j] - t).abs() <= 1e-12 * self.grid.horizon() {
            Ok(j)
        } else {
            Err(SpectralError::NotANode(t))
        }
    }

    fn check(&self, f: &SpectralField) -> Result<(), SpectralError> {
        if f.coeffs.len() != self.modes() {
            return Err(SpectralError::ModeMismatch {
                got: f.coeffs.len(),
                want: self.modes(),
            });
        }
        Ok(())
    }

    /// `s_{λ_k}(t_j)` for every mode.
    pub fn s_column(&self, j: usize) -> Vec<f64> {
        self.tables.iter().map(|t| t.s[j]).collect()
    }

    pub fn sdot_column(&self, j: usize) -> Result<Vec<f64>, SpectralError> {
        self.tables
            .iter()
            .map(|t| t.sdot.as_ref().map(|v| v[j]).ok_or(SpectralError::NoDerivatives))
            .collect()
    }

    /// `S(t_j) f`.
    pub fn apply_s(&self, j: usize, f: &SpectralField) -> Result<SpectralField, SpectralError> {
        self.check(f)?;
        Ok(f.map(|i, c| self.tables[i].s[j] * c))
    }

    /// `Ṡ(t_j) f`.
    pub fn apply_sdot(&self, j: usize, f: &SpectralField) -> Result<SpectralField, SpectralError> {
        self.check(f)?;
        let col = self.sdot_column(j)?;
        Ok(f.map(|i, c| col[i] * c))
    }

    /// `∫₀^{t_j} S(σ) f dσ`, exact for the piecewise-linear `s`.
    pub fn integrated_resolvent(&self, j: usize, f: &SpectralField) -> Result<SpectralField, SpectralError> {
        self.check(f)?;
        let t = self.grid.nodes();
        Ok(f.map(|i, c| {
            let s = &self.tables[i].s;
            let mut acc = 0.0;
            for m in 1..=j {
                acc += 0.5 * (t[m] - t[m - 1]) * (s[m] + s[m - 1]);
            }
            acc * c
        }))
    }

    /// `λ_k^{1/ρ} ∫₀^t s_{λ_k}` maximized over grid times, per mode.
    pub fn integrated_bound(&self, rho: f64) -> Vec<f64> {
        let t = self.grid.nodes();
        self.tables
            .iter()
            .zip(self.basis.eigenvalues())
            .map(|(tab, &lam)| {
                let mut acc = 0.0;
                let mut sup: f64 = 0.0;
                for m in 1..t.len() {
                    acc += 0.5 * (t[m] - t[m - 1]) * (tab.s[m] + tab.s[m - 1]);
                    sup = sup.max(acc.abs());
                }
                lam.powf(1.0 / rho) * sup
            })
            .collect()
    }
}

/// Which operator norm `measure_smoothing` tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingQuantity {
    /// `‖A^s S(t)‖ ~ t^{−sρ}`.
    S,
    /// `‖A^s Ṡ(t)‖ ~ t^{−sρ−1}`.
    Sdot,
    /// `‖A^{−s} Ṡ(t)‖ ~ t^{ρs−1}`.
    InverseSdot,
}

impl SmoothingQuantity {
    pub fn target(self, s: f64, rho: f64) -> f64 {
        match self {
            SmoothingQuantity::S => -s * rho,
            SmoothingQuantity::Sdot => -s * rho - 1.0,
            SmoothingQuantity::InverseSdot => rho * s - 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SmoothingQuantity::S => "A^s S(t)",
            SmoothingQuantity::Sdot => "A^s Sdot(t)",
            SmoothingQuantity::InverseSdot => "A^-s Sdot(t)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothingPoint {
    pub t: f64,
    pub norm: f64,
    /// 1-based mode realizing the maximum.
    pub argmax: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothingReport {
    pub quantity: SmoothingQuantity,
    pub s: f64,
    pub rho: f64,
    pub slope: f64,
    pub target: f64,
    pub fit: LineFit,
    pub window: (f64, f64),
    pub points: Vec<SmoothingPoint>,
    /// Times dropped from the fit because the maximum sat at `k = N`.
    pub truncated: usize,
}

impl SmoothingReport {
    pub fn within(&self, tol: f64) -> bool {
        (self.slope - self.target).abs() <= tol
    }
}

/// Default fitting window `[t_min, T/10]`, `t_min` the first node with
/// `t_j ≥ 5Δt_j`.
pub fn default_window(grid: &TimeGrid) -> (f64, f64) {
    let t = grid.nodes();
    let lo = (1..t.len()).find(|&j| t[j] >= 5.0 * grid.dt(j)).map_or(t[1], |j| t[j]);
    (lo, grid.horizon() / 10.0)
}

/// Operator norm of the diagonal operator at node `j`: the largest
/// `|λ_k^{±s} x_k(t_j)|` and the mode attaining it.
pub fn diagonal_norm(
    bank: &ResolventBank,
    quantity: SmoothingQuantity,
    s: f64,
    j: usize,
) -> Result<(f64, usize), SpectralError> {
    let lam = bank.basis.eigenvalues();
    let col = match quantity {
        SmoothingQuantity::S => bank.s_column(j),
        _ => bank.sdot_column(j)?,
    };
    let power = match quantity {
        SmoothingQuantity::InverseSdot => -s,
        _ => s,
    };
    let mut best = (0.0, 1);
    for (i, (&x, &l)) in col.iter().zip(lam).enumerate() {
        let v = (l.powf(power) * x).abs();
        if v > best.0 {
            best = (v, i + 1);
        }
    }
    Ok(best)
}

/// Log-log slope of the chosen operator norm against `t` over `window`
/// (default [`default_window`]), on at most `max_points` log-spaced nodes.
pub fn measure_smoothing(
    bank: &ResolventBank,
    quantity: SmoothingQuantity,
    s: f64,
    rho: f64,
    window: Option<(f64, f64)>,
    max_points: usize,
) -> Result<SmoothingReport, SpectralError> {
    let window = window.unwrap_or_else(|| default_window(&bank.grid));
    if !(window.0 > 0.0 && window.1 > window.0) {
        return Err(SpectralError::Invalid(format!("bad window {window:?}")));
    }
    let mut nodes: Vec<usize> = fit::logspace(window.0, window.1, max_points.max(2))
        .into_iter()
        .map(|t| bank.grid.nearest(t))
        .filter(|&j| j > 0)
        .collect();
    nodes.dedup();
    let n = bank.modes();
    let mut points = Vec::new();
    let mut truncated = 0;
    for &j in &nodes {
        let (norm, argmax) = diagonal_norm(bank, quantity, s, j)?;
        if argmax == n && n > 1 {
            truncated += 1;
            continue;
        }
        points.push(SmoothingPoint {
            t: bank.grid.nodes()[j],
            norm,
            argmax,
        });
    }
    if points.len() < 3 {
        return Err(SpectralError::SpectralTruncationDominates);
    }
    let ts: Vec<f64> = points.iter().map(|p| p.t).collect();
    let ns: Vec<f64> = points.iter().map(|p| p.norm).collect();
    let fit = fit::loglog(&ts, &ns).ok_or_else(|| SpectralError::Invalid("degenerate smoothing fit".into()))?;
    Ok(SmoothingReport {
        quantity,
        s,
        rho,
        slope: fit.slope,
        target: quantity.target(s, rho),
        fit,
        window,
        points,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mittag_leffler::mittag_leffler;

    fn basis(n: usize) -> Arc<SpectralBasis> {
        Arc::new(SpectralBasis::new(n))
    }

    #[test]
    fn powers_and_norms() {
        let b = basis(4);
        let e1 = SpectralField::unit(Arc::clone(&b), 1);
        assert_eq!(frac_power_apply(0.0, &e1), e1);
        assert!((frac_power_apply(1.0, &e1).coeffs[0] - PI * PI).abs() < 1e-13);
        let f = SpectralField::new(Arc::clone(&b), vec![0.3, -1.0, 2.0, 0.5]).unwrap();
        let back = frac_power_apply(0.5, &frac_power_apply(-0.5, &f));
        for (x, y) in back.coeffs.iter().zip(&f.coeffs) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!((hdot_norm(0.0, &e1) - 1.0).abs() < 1e-15);
        assert!((hdot_norm(2.0, &e1) - PI * PI).abs() < 1e-12);
        let e12 = e1.add(&SpectralField::unit(b, 2));
        assert!((hdot_norm(1.0, &e12) - PI * 5f64.sqrt()).abs() < 1e-12);
        assert!((hdot_norm(0.0, &f).powi(2) - f.coeffs.iter().map(|c| c * c).sum::<f64>()).abs() < 1e-14);
    }

    #[test]
    fn bank_matches_mittag_leffler_and_contracts() {
        let b = basis(6);
        let grid = Arc::new(TimeGrid::uniform(1.0, 1024).unwrap());
        let bank = build_resolvent_bank(&KernelSpec::riesz(1.5), Arc::clone(&b), grid).unwrap();
        let e1 = SpectralField::unit(Arc::clone(&b), 1);
        assert_eq!(bank.apply_s(0, &e1).unwrap(), e1);
        let j = bank.node_index(0.5).unwrap();
        let v = bank.apply_s(j, &e1).unwrap().coeffs[0];
        let want = mittag_leffler(1.5, -PI * PI * 0.5f64.powf(1.5)).unwrap();
        assert!((v - want).abs() < 1e-5);
        let f = SpectralField::new(b, vec![1.0, -2.0, 0.5, 0.1, 3.0, -0.7]).unwrap();
        for j in [1, 100, 1024] {
            assert!(hdot_norm(0.0, &bank.apply_s(j, &f).unwrap()) <= hdot_norm(0.0, &f) * (1.0 + 1e-9));
        }
        assert!(matches!(bank.node_index(0.1234567), Err(SpectralError::NotANode(_))));
    }

    #[test]
    fn operators_commute_and_integrate_linearly() {
        let b = basis(5);
        let grid = Arc::new(TimeGrid::uniform(1.0, 256).unwrap());
        let bank = build_resolvent_bank(&KernelSpec::FiniteHistory { rho: 1.4 }, Arc::clone(&b), grid).unwrap();
        let f = SpectralField::new(Arc::clone(&b), vec![1.0, 0.5, -0.25, 2.0, 1.5]).unwrap();
        let g = SpectralField::new(b, vec![0.0, 1.0, 1.0, -1.0, 0.3]).unwrap();
        let a = bank.apply_s(100, &frac_power_apply(0.7, &f)).unwrap();
        let c = frac_power_apply(0.7, &bank.apply_s(100, &f).unwrap());
        assert_eq!(a, c);
        let sum = bank.integrated_resolvent(200, &f.add(&g)).unwrap();
        let parts = bank
            .integrated_resolvent(200, &f)
            .unwrap()
            .add(&bank.integrated_resolvent(200, &g).unwrap());
        for (x, y) in sum.coeffs.iter().zip(&parts.coeffs) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!(bank.integrated_resolvent(0, &f).unwrap().coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn diagonal_norm_is_brute_force_max() {
        let b = basis(12);
        let grid = Arc::new(TimeGrid::uniform(0.5, 512).unwrap());
        let bank = build_resolvent_bank(&KernelSpec::riesz(1.5), b, grid).unwrap();
        let (norm, k) = diagonal_norm(&bank, SmoothingQuantity::S, 0.5, 40).unwrap();
        // Norm of a diagonal operator: sup over unit vectors, attained at e_k.
        for i in 1..=12 {
            let e = SpectralField::unit(Arc::clone(&bank.basis), i);
            let img = frac_power_apply(0.5, &bank.apply_s(40, &e).unwrap());
            assert!(hdot_norm(0.0, &img) <= norm * (1.0 + 1e-15));
        }
        let e = SpectralField::unit(Arc::clone(&bank.basis), k);
        let img = frac_power_apply(0.5, &bank.apply_s(40, &e).unwrap());
        assert!((hdot_norm(0.0, &img) - norm).abs() < 1e-12 * norm);
    }

    #[test]
    fn zero_power_smoothing_is_flat() {
        let grid = Arc::new(TimeGrid::uniform(1.0, 2048).unwrap());
        let bank = build_resolvent_bank(&KernelSpec::riesz(1.5), basis(32), grid).unwrap();
        let r = measure_smoothing(&bank, SmoothingQuantity::S, 0.0, 1.5, None, 30).unwrap();
        // ‖S(t)‖ = s_{λ₁}(t), which only starts to decay near the window end.
        assert!(r.within(0.1), "{}", r.slope);
        assert!(r.points.iter().all(|p| p.norm <= 1.0 + 1e-9));
    }

    #[test]
    fn strict_bank_names_the_coarse_mode() {
        let grid = Arc::new(TimeGrid::uniform(1.0, 16).unwrap());
        let err = build_resolvent_bank(&KernelSpec::riesz(1.5), basis(40), grid).unwrap_err();
        assert!(matches!(err, SpectralError::Mode { source: ResolventError::GridTooCoarse { .. }, .. }));
    }
}
