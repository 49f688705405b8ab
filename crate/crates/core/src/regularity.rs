//! Empirical regularity: mean-p temporal Hölder slopes in `Ḣ^s`, maximal
//! bounds, per-path Hölder quotients, and the elementary κ-integrals that
//! drive the exponent `min{1/2, κ/2 + 1}` with `κ = (r − s − 1)ρ`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::fit::{loglog, LineFit};
use crate::grid::TimeGrid;
use crate::mild::Ensemble;
use crate::noise::MarginalSampler;
use crate::quad::{integrate, integrate_pieces, QuadError, Tolerance};
use crate::spectral::SpectralBasis;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RegularityError {
    #[error("lag {h} outside the admissible range ({lo}, {hi})")]
    LagOutOfRange { h: f64, lo: f64, hi: f64 },
    #[error("need at least {need} lags for a fit, got {got}")]
    TooFewLags { got: usize, need: usize },
    #[error("ensemble too small: confidence half-width {half_width:.3} exceeds 0.1")]
    EnsembleTooSmall { half_width: f64 },
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("maximal bound unstable under refinement: {coarse} -> {fine}")]
    Unstable { coarse: f64, fine: f64 },
    #[error("time {0} is not an observation time")]
    NotObserved(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// `κ = (r − s − 1)ρ`.
pub fn kappa(r: f64, s: f64, rho: f64) -> f64 {
    (r - s - 1.0) * rho
}

/// `min{1/2, κ/2 + 1}`.
pub fn predicted_exponent(kappa: f64) -> f64 {
    (kappa / 2.0 + 1.0).min(0.5)
}

/// Spectral coefficients of many paths at a common set of times.
#[derive(Debug, Clone)]
pub struct Observations {
    pub basis: Arc<SpectralBasis>,
    pub times: Vec<f64>,
    pub modes: usize,
    /// Per path, observation-major: `samples[p][a·modes + k]`.
    pub samples: Vec<Vec<f64>>,
}

impl Observations {
    /// Picks the grid nodes `nodes` out of every solved path.
    pub fn from_ensemble(ens: &Ensemble, nodes: &[usize]) -> Self {
        let t = ens.grid.nodes();
        let modes = ens.basis.modes();
        let samples = ens
            .paths
            .iter()
            .map(|u| nodes.iter().flat_map(|&j| u.at(j).iter().copied()).collect())
            .collect();
        Self {
            basis: Arc::clone(&ens.basis),
            times: nodes.iter().map(|&j| t[j]).collect(),
            modes,
            samples,
        }
    }

    /// Exact-law draws of the stochastic convolution at the sampler's nodes,
    /// paths `0..n_paths`.
    pub fn from_sampler(
        basis: Arc<SpectralBasis>,
        grid: &TimeGrid,
        sampler: &MarginalSampler,
        seed: u64,
        n_paths: usize,
    ) -> Self {
        let t = grid.nodes();
        let samples = (0..n_paths as u64).into_par_iter().map(|p| sampler.sample(seed, p)).collect();
        Self {
            basis,
            times: sampler.nodes.iter().map(|&j| t[j]).collect(),
            modes: sampler.modes,
            samples,
        }
    }

    pub fn n_paths(&self) -> usize {
        self.samples.len()
    }

    /// Index of the observation time within `1e−9` relative of `t`.
    pub fn index_of(&self, t: f64) -> Result<usize, RegularityError> {
        let tol = 1e-9 * self.times.last().copied().unwrap_or(1.0).abs().max(1.0);
        self.times
            .iter()
            .position(|&x| (x - t).abs() <= tol)
            .ok_or(RegularityError::NotObserved(t))
    }

    /// `‖u(t_a)‖²_{Ḣ^s}` for one path.
    pub fn norm_sq(&self, path: usize, a: usize, s: f64) -> f64 {
        let lam = self.basis.eigenvalues();
        let x = &self.samples[path][a * self.modes..(a + 1) * self.modes];
        x.iter().zip(lam).map(|(v, l)| l.powf(s) * v * v).sum()
    }

    /// `‖u(t_b) − u(t_a)‖²_{Ḣ^s}` for one path.
    pub fn increment_sq(&self, path: usize, a: usize, b: usize, s: f64) -> f64 {
        let lam = self.basis.eigenvalues();
        let m = self.modes;
        let x = &self.samples[path];
        (0..m)
            .map(|k| {
                let d = x[b * m + k] - x[a * m + k];
                lam[k].powf(s) * d * d
            })
            .sum()
    }
}

/// Base points and dyadic lags of a Hölder fit, as node indices of a uniform
/// grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderDesign {
    pub horizon: f64,
    pub dt: f64,
    pub base_nodes: Vec<usize>,
    pub lag_steps: Vec<usize>,
}

pub const MIN_LAGS: usize = 5;

impl HolderDesign {
    /// Base points `T/4, T/2, 3T/4` and lags `h = T·2^{−k}`,
    /// `k = 3..=min(9, ⌊log₂(T/(4Δt))⌋)`.
    pub fn dyadic(grid: &TimeGrid) -> Result<Self, RegularityError> {
        let n = grid.steps();
        let dt = grid
            .uniform_step()
            .ok_or_else(|| RegularityError::ParameterOutOfRange("Hölder fits need a uniform grid".into()))?;
        let kmax = ((n as f64 / 4.0).log2().floor() as usize).min(9);
        let ks: Vec<u32> = (3..=kmax as u32).filter(|&k| n % (1 << k) == 0).collect();
        Self::new(grid.horizon(), dt, vec![n / 4, n / 2, 3 * n / 4], ks.iter().map(|&k| n >> k).collect())
    }

    pub fn new(horizon: f64, dt: f64, base_nodes: Vec<usize>, mut lag_steps: Vec<usize>) -> Result<Self, RegularityError> {
        lag_steps.sort_unstable_by(|a, b| b.cmp(a));
        lag_steps.dedup();
        for &m in &lag_steps {
            let h = m as f64 * dt;
            if !(m >= 4 && h <= horizon / 4.0 * (1.0 + 1e-12)) {
                return Err(RegularityError::LagOutOfRange {
                    h,
                    lo: 4.0 * dt,
                    hi: horizon / 4.0,
                });
            }
        }
        if lag_steps.len() < MIN_LAGS {
            return Err(RegularityError::TooFewLags {
                got: lag_steps.len(),
                need: MIN_LAGS,
            });
        }
        Ok(Self {
            horizon,
            dt,
            base_nodes,
            lag_steps,
        })
    }

    pub fn lags(&self) -> Vec<f64> {
        self.lag_steps.iter().map(|&m| m as f64 * self.dt).collect()
    }

    /// Every node the fit touches, sorted.
    pub fn nodes(&self) -> Vec<usize> {
        let mut v = self.base_nodes.clone();
        for &b in &self.base_nodes {
            v.extend(self.lag_steps.iter().map(|&m| b + m));
        }
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Exact `(E‖W(t+h) − W(t)‖²_{Ḣ^s})^{1/2}` averaged over base points,
    /// from the sampler's covariances. Requires the sampler built on
    /// [`HolderDesign::nodes`].
    pub fn exact_curve(&self, sampler: &MarginalSampler, basis: &SpectralBasis, s: f64) -> Vec<f64> {
        let pos = |j: usize| sampler.nodes.iter().position(|&x| x == j).expect("design node");
        let lam = basis.eigenvalues();
        self.lag_steps
            .iter()
            .map(|&m| {
                let mut acc = 0.0;
                for &b in &self.base_nodes {
                    let (a, c) = (pos(b), pos(b + m));
                    for k in 0..sampler.modes {
                        let v = sampler.covariance(k, a, a) - 2.0 * sampler.covariance(k, a, c) + sampler.covariance(k, c, c);
                        acc += lam[k].powf(s) * v;
                    }
                }
                (acc / self.base_nodes.len() as f64).sqrt()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderFit {
    pub s: f64,
    pub p: f64,
    pub lags: Vec<f64>,
    /// `(E‖u(t+h) − u(t)‖^p)^{1/p}`, pooled over base points.
    pub d: Vec<f64>,
    /// Same with the largest base-point value instead of the pooled mean.
    pub d_sup: Vec<f64>,
    pub fit: LineFit,
    pub slope: f64,
    pub half_width: f64,
    pub slope_sup: f64,
    pub n_paths: usize,
}

/// Fits `log D(h)` against `log h`. Fails with `EnsembleTooSmall` when the
/// two-standard-error band is wider than 0.1.
pub fn estimate_holder(obs: &Observations, design: &HolderDesign, s: f64, p: f64) -> Result<HolderFit, RegularityError> {
    let fit = holder_fit(obs, design, s, p)?;
    if fit.half_width > 0.1 {
        return Err(RegularityError::EnsembleTooSmall {
            half_width: fit.half_width,
        });
    }
    Ok(fit)
}

/// [`estimate_holder`] without the confidence check.
pub fn holder_fit(obs: &Observations, design: &HolderDesign, s: f64, p: f64) -> Result<HolderFit, RegularityError> {
    if !(p >= 1.0) {
        return Err(RegularityError::ParameterOutOfRange(format!("moment order p = {p}")));
    }
    let t_of = |j: usize| j as f64 * design.dt;
    let bases: Vec<usize> = design
        .base_nodes
        .iter()
        .map(|&b| obs.index_of(t_of(b)))
        .collect::<Result<_, _>>()?;
    let lags = design.lags();
    let mut d = Vec::with_capacity(lags.len());
    let mut d_sup = Vec::with_capacity(lags.len());
    for &m in &design.lag_steps {
        let mut per_base = Vec::with_capacity(bases.len());
        for (&bi, &b) in bases.iter().zip(&design.base_nodes) {
            let ci = obs.index_of(t_of(b + m))?;
            let sum: f64 = (0..obs.n_paths())
                .map(|path| obs.increment_sq(path, bi, ci, s).powf(p / 2.0))
                .sum();
            per_base.push(sum / obs.n_paths() as f64);
        }
        let pooled = per_base.iter().sum::<f64>() / per_base.len() as f64;
        d.push(pooled.powf(1.0 / p));
        d_sup.push(per_base.iter().fold(0.0f64, |a, &b| a.max(b)).powf(1.0 / p));
    }
    let fit = loglog(&lags, &d).ok_or(RegularityError::TooFewLags { got: 0, need: MIN_LAGS })?;
    let sup = loglog(&lags, &d_sup).ok_or(RegularityError::TooFewLags { got: 0, need: MIN_LAGS })?;
    Ok(HolderFit {
        s,
        p,
        lags,
        d,
        d_sup,
        slope: fit.slope,
        half_width: fit.half_width(),
        slope_sup: sup.slope,
        fit,
        n_paths: obs.n_paths(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxBound {
    pub s: f64,
    pub p: f64,
    /// Mean over paths of `max_a ‖u(t_a)‖^p_{Ḣ^s}`.
    pub value: f64,
    pub stderr: f64,
    pub n_paths: usize,
}

pub fn max_bound(obs: &Observations, s: f64, p: f64) -> MaxBound {
    let vals: Vec<f64> = (0..obs.n_paths())
        .map(|path| {
            (0..obs.times.len())
                .map(|a| obs.norm_sq(path, a, s).powf(p / 2.0))
                .fold(0.0, f64::max)
        })
        .collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    MaxBound {
        s,
        p,
        value: mean,
        stderr: (var / n).sqrt(),
        n_paths: vals.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxBoundStability {
    pub coarse: MaxBound,
    pub fine: MaxBound,
    /// `fine/coarse − 1`.
    pub relative_change: f64,
    /// `|relative_change| < 0.1`.
    pub stable: bool,
}

impl MaxBoundStability {
    pub fn new(coarse: MaxBound, fine: MaxBound) -> Self {
        let relative_change = fine.value / coarse.value - 1.0;
        Self {
            stable: relative_change.abs() < 0.1,
            coarse,
            fine,
            relative_change,
        }
    }

    pub fn check(&self) -> Result<(), RegularityError> {
        if self.stable {
            Ok(())
        } else {
            Err(RegularityError::Unstable {
                coarse: self.coarse.value,
                fine: self.fine.value,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuotientStats {
    pub beta: f64,
    pub median: f64,
    pub p95: f64,
    /// Same statistics with the smallest lag dropped.
    pub median_coarse: f64,
    pub p95_coarse: f64,
    /// `p95/p95_coarse − 1 < 0.1`.
    pub stable: bool,
}

/// Per path, `max ‖u(t_b) − u(t_a)‖_{Ḣ^s}/(t_b − t_a)^β` over pairs of
/// observation times whose index distance is a power of two. Observation
/// times should be equally spaced.
pub fn pathwise_holder(obs: &Observations, s: f64, betas: &[f64]) -> Result<Vec<QuotientStats>, RegularityError> {
    let m = obs.times.len();
    if obs.n_paths() < 20 || m < 4 {
        return Err(RegularityError::ParameterOutOfRange(
            "pathwise quotients need at least 20 paths and 4 times".into(),
        ));
    }
    let mut dists = Vec::new();
    let mut d = 1;
    while d < m {
        dists.push(d);
        d *= 2;
    }
    // Per path and distance, the largest increment norm.
    let incr: Vec<Vec<(f64, f64)>> = (0..obs.n_paths())
        .into_par_iter()
        .map(|path| {
            dists
                .iter()
                .map(|&d| {
                    let best = (0..m - d)
                        .map(|a| obs.increment_sq(path, a, a + d, s).sqrt())
                        .fold(0.0, f64::max);
                    (best, obs.times[d] - obs.times[0])
                })
                .collect()
        })
        .collect();
    Ok(betas
        .iter()
        .map(|&beta| {
            let q = |skip_first: bool| -> Vec<f64> {
                let mut v: Vec<f64> = incr
                    .iter()
                    .map(|row| {
                        row.iter()
                            .skip(usize::from(skip_first))
                            .map(|&(n, h)| n / h.powf(beta))
                            .fold(0.0, f64::max)
                    })
                    .collect();
                v.sort_by(f64::total_cmp);
                v
            };
            let fine = q(false);
            let coarse = q(true);
            let (p95, p95_coarse) = (quantile(&fine, 0.95), quantile(&coarse, 0.95));
            QuotientStats {
                beta,
                median: quantile(&fine, 0.5),
                p95,
                median_coarse: quantile(&coarse, 0.5),
                p95_coarse,
                stable: p95 / p95_coarse - 1.0 < 0.1,
            }
        })
        .collect())
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let x = q * (sorted.len() - 1) as f64;
    let i = x.floor() as usize;
    let f = x - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

/// `∫_t^{t+h} ∫_0^t (η−σ)^{κ/2−1} dσ dη` and
/// `∫_t^{t+h} (∫_0^t (η−σ)^{κ−1} dσ)^{1/2} dη`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaIntegrals {
    pub kappa: f64,
    pub t: f64,
    pub h: f64,
    /// Closed form.
    pub i1: f64,
    /// Closed-form inner integral, outer by quadrature.
    pub i2: f64,
}

fn check_kappa(kappa: f64, t: f64, h: f64) -> Result<(), RegularityError> {
    if !(kappa > -2.0 && kappa < 0.0) {
        return Err(RegularityError::ParameterOutOfRange(format!("kappa = {kappa} not in (-2, 0)")));
    }
    if !(t > 0.0 && h > 0.0) {
        return Err(RegularityError::ParameterOutOfRange("t and h must be positive".into()));
    }
    Ok(())
}

/// `(t + d)^a − t^a` without cancellation for small `d`.
fn shifted_power_diff(t: f64, d: f64, a: f64) -> f64 {
    t.powf(a) * (a * (d / t).ln_1p()).exp_m1()
}

/// `∫_0^t (t + d − σ)^{a−1} dσ = (d^a − (t+d)^a)/(−a)` for `a < 0`.
pub fn kappa_inner(a: f64, t: f64, d: f64) -> f64 {
    // d^a − (t+d)^a = d^a (1 − (1 + t/d)^a)
    -(d.powf(a) * -(a * (t / d).ln_1p()).exp_m1()) / a
}

/// `I₁ = (2/|κ|)/(κ/2+1) · [h^{κ/2+1} − ((t+h)^{κ/2+1} − t^{κ/2+1})]`.
pub fn kappa_i1(kappa: f64, t: f64, h: f64) -> Result<f64, RegularityError> {
    check_kappa(kappa, t, h)?;
    let a = kappa / 2.0;
    Ok((-1.0 / a) / (a + 1.0) * (h.powf(a + 1.0) - shifted_power_diff(t, h, a + 1.0)))
}

/// Outer integral over `η = t + h·v^m`, `m = 1/(κ/2+1)`, which removes the
/// `(η−t)^{κ/2}` endpoint singularity.
fn outer_quadrature(kappa: f64, h: f64, inner: impl Fn(f64) -> f64, tol: Tolerance) -> Result<f64, RegularityError> {
    let m = 1.0 / (kappa / 2.0 + 1.0);
    let r = integrate(
        |v: f64| {
            if v == 0.0 {
                return 0.0;
            }
            let d = h * v.powf(m);
            inner(d) * m * h * v.powf(m - 1.0)
        },
        0.0,
        1.0,
        tol,
    )?;
    Ok(r.value)
}

pub fn kappa_i2(kappa: f64, t: f64, h: f64) -> Result<f64, RegularityError> {
    check_kappa(kappa, t, h)?;
    outer_quadrature(kappa, h, |d| kappa_inner(kappa, t, d).sqrt(), Tolerance::new(0.0, 1e-13))
}

pub fn kappa_integrals(kappa: f64, t: f64, h: f64) -> Result<KappaIntegrals, RegularityError> {
    Ok(KappaIntegrals {
        kappa,
        t,
        h,
        i1: kappa_i1(kappa, t, h)?,
        i2: kappa_i2(kappa, t, h)?,
    })
}

/// Inner integral by adaptive quadrature over `σ`, split geometrically
/// towards the near-singular end `σ = t`.
pub fn kappa_inner_quadrature(a: f64, t: f64, d: f64) -> Result<f64, RegularityError> {
    // u = t − σ ∈ [0, t], integrand (d + u)^{a−1}.
    let mut pts = vec![0.0];
    let mut x = d;
    while x < t {
        pts.push(x);
        x *= 2.0;
    }
    pts.push(t);
    Ok(integrate_pieces(|u: f64| (d + u).powf(a - 1.0), &pts, Tolerance::new(0.0, 1e-14))?.value)
}

/// Both integrals with every inner integral done by quadrature.
pub fn kappa_integrals_quadrature(kappa: f64, t: f64, h: f64) -> Result<(f64, f64), RegularityError> {
    check_kappa(kappa, t, h)?;
    let tol = Tolerance::new(0.0, 1e-12);
    let inner = |a: f64, d: f64| kappa_inner_quadrature(a, t, d).unwrap_or(f64::NAN);
    let i1 = outer_quadrature(kappa, h, |d| inner(kappa / 2.0, d), tol)?;
    let i2 = outer_quadrature(kappa, h, |d| inner(kappa, d).sqrt(), tol)?;
    Ok((i1, i2))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaSlopes {
    pub kappa: f64,
    pub t: f64,
    pub hs: Vec<f64>,
    pub i1: Vec<f64>,
    pub i2: Vec<f64>,
    pub slope_i1: f64,
    pub slope_i2: f64,
    /// `κ/2 + 1`.
    pub target: f64,
    /// `max_h I/h^{κ/2+1}` for each integral.
    pub c1: f64,
    pub c2: f64,
}

/// `h = 2^{−k}`, `k = 24, 28, …, 60`: deep enough that the `h`-linear
/// correction is negligible even for `κ` close to zero.
pub fn kappa_h_grid() -> Vec<f64> {
    (0..10).map(|i| 2f64.powi(-(24 + 4 * i))).collect()
}

pub fn kappa_slopes(kappa: f64, t: f64, hs: &[f64]) -> Result<KappaSlopes, RegularityError> {
    let vals: Vec<KappaIntegrals> = hs.iter().map(|&h| kappa_integrals(kappa, t, h)).collect::<Result<_, _>>()?;
    let i1: Vec<f64> = vals.iter().map(|v| v.i1).collect();
    let i2: Vec<f64> = vals.iter().map(|v| v.i2).collect();
    let bad = || RegularityError::ParameterOutOfRange("need at least two h values".into());
    let target = kappa / 2.0 + 1.0;
    let c = |xs: &[f64]| xs.iter().zip(hs).map(|(x, h)| x / h.powf(target)).fold(0.0, f64::max);
    Ok(KappaSlopes {
        kappa,
        t,
        hs: hs.to_vec(),
        slope_i1: loglog(hs, &i1).ok_or_else(bad)?.slope,
        slope_i2: loglog(hs, &i2).ok_or_else(bad)?.slope,
        target,
        c1: c(&i1),
        c2: c(&i2),
        i1,
        i2,
    })
}

/// One row of a regularity report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityRow {
    pub s: f64,
    pub kappa: f64,
    pub predicted: f64,
    pub holder: HolderFit,
    pub max_bound: MaxBound,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub r: f64,
    pub rho: f64,
    pub p: f64,
    pub tolerance: f64,
    /// Two-sided check. Otherwise the prediction is only a lower bound on
    /// the exponent and a row passes when the slope is at least
    /// `predicted − tolerance`.
    pub sharp: bool,
    pub lags: Vec<f64>,
    pub rows: Vec<RegularityRow>,
}

/// Fits every `s`; a row passes when the slope is within `tolerance` of
/// the prediction (or above it, when not `sharp`).
pub fn regularity_report(
    obs: &Observations,
    design: &HolderDesign,
    r: f64,
    rho: f64,
    s_values: &[f64],
    p: f64,
    tolerance: f64,
    sharp: bool,
) -> Result<RegularityReport, RegularityError> {
    let rows = s_values
        .par_iter()
        .map(|&s| {
            let k = kappa(r, s, rho);
            if !(k > -2.0 && k < 0.0) {
                return Err(RegularityError::ParameterOutOfRange(format!(
                    "s = {s} gives kappa = {k} outside (-2, 0)"
                )));
            }
            let predicted = predicted_exponent(k);
            let holder = holder_fit(obs, design, s, p)?;
            let pass = if sharp {
                (holder.slope - predicted).abs() <= tolerance
            } else {
                holder.slope >= predicted - tolerance
            };
            Ok(RegularityRow {
                s,
                kappa: k,
                predicted,
                max_bound: max_bound(obs, s, p),
                holder,
                pass,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RegularityReport {
        r,
        rho,
        p,
        tolerance,
        sharp,
        lags: design.lags(),
        rows,
    })
}
