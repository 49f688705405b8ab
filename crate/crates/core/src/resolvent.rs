//! Scalar resolvent `s_μ`: `ṡ + μ (b ∗ s) = 0`, `s(0) = 1`.
//!
//! The integrated form `s(t) = 1 − μ ∫₀ᵗ B(t−σ) s(σ) dσ` is discretized by
//! product integration: `s` is piecewise linear and the primitive `B` is
//! integrated exactly against each hat function. The weights depend on the
//! kernel and the grid only, so one set serves every μ.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::fit::{self, LineFit};
use crate::grid::TimeGrid;
use crate::kernel::{KernelError, KernelSpec};
use crate::quad::dot;
use crate::report::Table;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ResolventError {
    #[error("grid too coarse for mu = {mu}: mu·‖b‖_L1(0,dt)·dt = {indicator:.3e} > 1")]
    GridTooCoarse { mu: f64, indicator: f64 },
    #[error("kernel moment failure: {0}")]
    KernelMomentFailure(#[from] KernelError),
    #[error("horizon too short: |s(T)| = {value:.3e} ≥ 0.01 for mu = {mu}")]
    HorizonTooShort { mu: f64, value: f64 },
    #[error("mu must be finite and ≥ 0, got {0}")]
    InvalidMu(f64),
    #[error("kernel support ends at {support} before the horizon {horizon}")]
    SupportTooShort { support: f64, horizon: f64 },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone)]
enum Storage {
    /// Uniform grid: `W_{n,i}` depends on `n − i` only.
    Toeplitz {
        /// `rev[N − ℓ] = L_{ℓ−1} + R_ℓ` for lags `ℓ = 1..N`; interior columns.
        w_rev: Vec<f64>,
        /// `L_p`, the weight of `s_0` at row `p + 1`.
        w_first: Vec<f64>,
        w_diag: f64,
        v_rev: Vec<f64>,
        v_first: Vec<f64>,
        v_diag: f64,
    },
    /// Rows `W_{n,0..=n}` stored back to back.
    Packed { w: Vec<f64>, v: Vec<f64> },
}

/// Product-integration weights for one (kernel, grid) pair.
#[derive(Debug, Clone)]
pub struct ResolventWeights {
    grid: Arc<TimeGrid>,
    storage: Storage,
    derivatives: bool,
    /// `b(t_n)`, NaN at `n = 0`.
    b_nodes: Vec<f64>,
    /// `‖b‖_{L¹(0, Δt_max)}` and `Δt_max`.
    l1_max_step: f64,
    max_step: f64,
}

fn row_offset(n: usize) -> usize {
    // rows 1..n−1 have lengths 2..n
    n * (n + 1) / 2 - 1
}

impl ResolventWeights {
    /// Weights for `s` and, with `derivatives`, for `ṡ` and `s̈`.
    pub fn new(kernel: &KernelSpec, grid: Arc<TimeGrid>, derivatives: bool) -> Result<Self, ResolventError> {
        kernel.validate()?;
        if kernel.support_end() < grid.horizon() {
            return Err(ResolventError::SupportTooShort {
                support: kernel.support_end(),
                horizon: grid.horizon(),
            });
        }
        let n = grid.steps();
        let storage = if let Some(h) = grid.uniform_step() {
            let lr = |order: usize| -> Result<(Vec<f64>, Vec<f64>), KernelError> {
                let mut l = vec![0.0; n];
                let mut r = vec![0.0; n];
                for p in 0..n {
                    let (a, b) = (p as f64 * h, (p + 1) as f64 * h);
                    let (m0, m1) = kernel.local_moments(order, a, b)?;
                    l[p] = m1 / h;
                    r[p] = (h * m0 - m1) / h;
                }
                Ok((l, r))
            };
            let combine = |l: &[f64], r: &[f64]| -> Vec<f64> {
                let mut rev = vec![0.0; n];
                for lag in 1..n {
                    rev[n - lag] = l[lag - 1] + r[lag];
                }
                rev
            };
            let (wl, wr) = lr(1)?;
            let (vl, vr) = if derivatives { lr(0)? } else { (vec![0.0; n], vec![0.0; n]) };
            Storage::Toeplitz {
                w_rev: combine(&wl, &wr),
                w_diag: wr[0],
                w_first: wl,
                v_rev: combine(&vl, &vr),
                v_diag: vr[0],
                v_first: vl,
            }
        } else {
            let t = grid.nodes();
            let build = |order: usize| -> Result<Vec<f64>, KernelError> {
                let rows: Vec<Vec<f64>> = (1..=n)
                    .into_par_iter()
                    .map(|row| {
                        let mut w = vec![0.0; row + 1];
                        for j in 0..row {
                            let h = t[j + 1] - t[j];
                            let (a, b) = (t[row] - t[j + 1], t[row] - t[j]);
                            let (m0, m1) = kernel.local_moments(order, a.max(0.0), b)?;
                            w[j] += m1 / h;
                            w[j + 1] += (h * m0 - m1) / h;
                        }
                        Ok(w)
                    })
                    .collect::<Result<_, KernelError>>()?;
                Ok(rows.concat())
            };
            let w = build(1)?;
            let v = if derivatives { build(0)? } else { Vec::new() };
            Storage::Packed { w, v }
        };
        let mut b_nodes = vec![f64::NAN; n + 1];
        if derivatives {
            for (j, &tj) in grid.nodes().iter().enumerate().skip(1) {
                b_nodes[j] = kernel.eval(tj)?;
            }
        }
        let max_step = (1..=n).map(|j| grid.dt(j)).fold(0.0, f64::max);
        let l1_max_step = kernel.l1_norm(max_step)?;
        Ok(Self {
            grid,
            storage,
            derivatives,
            b_nodes,
            l1_max_step,
            max_step,
        })
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn has_derivatives(&self) -> bool {
        self.derivatives
    }

    /// `μ‖b‖_{L¹(0,Δt)}Δt` at the largest step. Above one the grid is
    /// flagged; well above (around ten for ρ = 1.5) the scheme develops a
    /// growing sawtooth mode.
    pub fn coarseness(&self, mu: f64) -> f64 {
        mu * self.l1_max_step * self.max_step
    }

    /// `(Σ_{i<n} W_{n,i} x_i, W_{n,n})` for the `B` weights (`primitive`)
    /// or the `b` weights.
    fn row(&self, primitive: bool, n: usize, x: &[f64]) -> (f64, f64) {
        match &self.storage {
            Storage::Toeplitz {
                w_rev,
                w_first,
                w_diag,
                v_rev,
                v_first,
                v_diag,
            } => {
                let (rev, first, diag) = if primitive {
                    (w_rev, w_first, *w_diag)
                } else {
                    (v_rev, v_first, *v_diag)
                };
                let big_n = rev.len();
                let interior = dot(&rev[big_n - n + 1..], &x[1..n]);
                (first[n - 1] * x[0] + interior, diag)
            }
            Storage::Packed { w, v } => {
                let data = if primitive { w } else { v };
                let off = row_offset(n);
                (dot(&data[off..off + n], &x[..n]), data[off + n])
            }
        }
    }

    /// `u̇ + μ(b∗u) = c·u`, `u(0) = u0`, by the same product rule; the
    /// reaction term is integrated exactly against the hat functions.
    pub fn solve_with_reaction(&self, mu: f64, c: f64, u0: f64) -> Vec<f64> {
        let t = self.grid.nodes();
        let n = self.grid.steps();
        let mut u = vec![0.0; n + 1];
        u[0] = u0;
        let mut integral = 0.0;
        for j in 1..=n {
            let h = t[j] - t[j - 1];
            let (hist, diag) = self.row(true, j, &u);
            let rhs = u0 - mu * hist + c * (integral + 0.5 * h * u[j - 1]);
            u[j] = rhs / (1.0 + mu * diag - 0.5 * c * h);
            integral += 0.5 * h * (u[j] + u[j - 1]);
        }
        u
    }

    /// Solves for one μ.
    pub fn solve(&self, mu: f64, strict: bool) -> Result<ScalarResolventTable, ResolventError> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(ResolventError::InvalidMu(mu));
        }
        let indicator = self.coarseness(mu);
        if strict && indicator > 1.0 {
            return Err(ResolventError::GridTooCoarse { mu, indicator });
        }
        let n = self.grid.steps();
        let mut s = vec![0.0; n + 1];
        s[0] = 1.0;
        for j in 1..=n {
            let (hist, diag) = self.row(true, j, &s);
            s[j] = (1.0 - mu * hist) / (1.0 + mu * diag);
        }
        let (sdot, sddot) = if self.derivatives {
            let mut sd = vec![0.0; n + 1];
            for j in 1..=n {
                let (hist, diag) = self.row(false, j, &s);
                sd[j] = -mu * (hist + diag * s[j]);
            }
            // b(t)·1 + (b∗ṡ)(t) = b(t)s(t) + ∫ (b(t−σ) − b(t)) ṡ(σ) dσ. The
            // left side cancels to a tiny remainder for large t; the right
            // side does not, provided ∫ṡ is taken with the same hat rule.
            let t = self.grid.nodes();
            let mut sdd = vec![f64::NAN; n + 1];
            let mut cum = 0.0;
            for j in 1..=n {
                let (hist, diag) = self.row(false, j, &sd);
                cum += 0.5 * (t[j] - t[j - 1]) * (sd[j] + sd[j - 1]);
                let bj = self.b_nodes[j];
                sdd[j] = -mu * (bj * s[j] + (hist + diag * sd[j]) - bj * cum);
            }
            (Some(sd), Some(sdd))
        } else {
            (None, None)
        };
        Ok(ScalarResolventTable {
            mu,
            grid: Arc::clone(&self.grid),
            s,
            sdot,
            sddot,
            coarse: indicator > 1.0,
        })
    }
}

/// `s_μ`, `ṡ_μ`, `s̈_μ` on a grid. `s̈` is NaN at `t = 0`.
#[derive(Debug, Clone)]
pub struct ScalarResolventTable {
    pub mu: f64,
    pub grid: Arc<TimeGrid>,
    pub s: Vec<f64>,
    pub sdot: Option<Vec<f64>>,
    pub sddot: Option<Vec<f64>>,
    /// The largest step failed the coarseness heuristic.
    pub coarse: bool,
}

impl ScalarResolventTable {
    pub fn t(&self) -> &[f64] {
        self.grid.nodes()
    }

    /// Columns `t, s, sdot, sddot`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["t", "s", "sdot", "sddot"]);
        for (j, &tj) in self.t().iter().enumerate() {
            let sd = self.sdot.as_ref().map_or(f64::NAN, |v| v[j]);
            let sdd = self.sddot.as_ref().map_or(f64::NAN, |v| v[j]);
            t.push_floats(&[tj, self.s[j], sd, sdd]);
        }
        t
    }

    pub fn sup_abs(&self) -> f64 {
        self.s.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Solves `ṡ + μ(b∗s) = 0` on `grid` with `s`, `ṡ` and `s̈`.
pub fn solve_scalar(kernel: &KernelSpec, mu: f64, grid: &TimeGrid) -> Result<ScalarResolventTable, ResolventError> {
    ResolventWeights::new(kernel, Arc::new(grid.clone()), true)?.solve(mu, true)
}

/// Independent residual `ṡ(t_j) + μ (b∗s)(t_j)`: the convolution of `b` with
/// the linear interpolant of `s` is recomputed by adaptive quadrature.
pub fn residual_check(kernel: &KernelSpec, table: &ScalarResolventTable, nodes: &[usize]) -> Result<f64, ResolventError> {
    let sdot = table
        .sdot
        .as_ref()
        .ok_or_else(|| ResolventError::Invalid("table carries no derivatives".into()))?;
    let t = table.t();
    let mut worst: f64 = 0.0;
    for &j in nodes {
        let tj = t[j];
        let mut conv = 0.0;
        for i in 0..j {
            let (a, b) = (tj - t[i + 1], tj - t[i]);
            let h = t[i + 1] - t[i];
            let (s0, s1) = (table.s[i], table.s[i + 1]);
            // s(σ) at u = tj − σ: linear between s1 (u = a) and s0 (u = b).
            let f = |u: f64| kernel.eval(u).map(|bv| bv * (s1 + (s0 - s1) * (u - a) / h));
            let piece = if a == 0.0 {
                crate::kernel::integrate_from_zero(f, b, kernel.leading_power(), crate::quad::Tolerance::new(1e-16, 1e-12))?
            } else {
                crate::quad::integrate(
                    |u| f(u).unwrap_or(f64::NAN),
                    a,
                    b,
                    crate::quad::Tolerance::new(1e-16, 1e-12),
                )
                .map_err(KernelError::from)?
                .value
            };
            conv += piece;
        }
        worst = worst.max((sdot[j] + table.mu * conv).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormRow {
    pub mu: f64,
    pub s_l1: f64,
    pub sdot_l1: f64,
    pub t_sdot_l1: f64,
    pub t_sddot_l1: f64,
    pub t2_sddot_l1: f64,
    pub sup_abs_s: f64,
    pub s_at_horizon: f64,
    /// Bound on `∫_T^∞ |ṡ|`, i.e. `|s(T)|` for eventually monotone tails.
    pub tail_sdot: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeCheck {
    pub name: String,
    pub slope: f64,
    pub target: f64,
    pub fit: LineFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub kernel: String,
    pub rho: f64,
    pub rows: Vec<NormRow>,
    pub slopes: Vec<SlopeCheck>,
    pub max_abs_s: f64,
}

impl ScalingReport {
    /// Every slope within `tol` of its target.
    pub fn within(&self, tol: f64) -> bool {
        self.slopes.iter().all(|c| (c.slope - c.target).abs() <= tol)
    }
}

fn trapezoid(t: &[f64], f: impl Fn(usize) -> f64, from: usize) -> f64 {
    (from + 1..t.len()).map(|j| 0.5 * (t[j] - t[j - 1]) * (f(j) + f(j - 1))).sum()
}

/// L¹ norms of `s`, `ṡ`, `tṡ`, `ts̈`, `t²s̈` per μ and their fitted μ-slopes.
pub fn verify_scalar_estimates(
    kernel: &KernelSpec,
    mu_grid: &[f64],
    grid: &TimeGrid,
) -> Result<ScalingReport, ResolventError> {
    if mu_grid.len() < 2 {
        return Err(ResolventError::Invalid("need at least two mu values".into()));
    }
    let weights = ResolventWeights::new(kernel, Arc::new(grid.clone()), true)?;
    let tables: Vec<ScalarResolventTable> = mu_grid
        .par_iter()
        .map(|&mu| weights.solve(mu, true))
        .collect::<Result<_, _>>()?;
    scaling_report(kernel, &tables)
}

/// The norm table and μ-slopes for tables already solved on one grid, with
/// derivatives.
pub fn scaling_report(kernel: &KernelSpec, tables: &[ScalarResolventTable]) -> Result<ScalingReport, ResolventError> {
    let rho = kernel
        .nominal_rho()
        .ok_or_else(|| ResolventError::Invalid("kernel has no nominal rho".into()))?;
    if tables.len() < 2 || tables.iter().any(|t| t.sddot.is_none()) {
        return Err(ResolventError::Invalid("need at least two tables with derivatives".into()));
    }
    let grid = &tables[0].grid;
    let t = grid.nodes();
    let t1 = t[1];
    let b1 = kernel.primitive(1, t1)?;
    let b2 = kernel.primitive(2, t1)?;
    let b3 = kernel.primitive(3, t1)?;
    // ∫₀^{t₁} t b and ∫₀^{t₁} t² b from the primitives; s̈ ≈ −μ b there.
    let m1 = t1 * b1 - b2;
    let m2 = 2.0 * b3 + t1 * t1 * b1 - 2.0 * t1 * b2;
    let mut rows = Vec::new();
    for tab in tables {
        let value = *tab.s.last().unwrap();
        if value.abs() >= 0.01 {
            return Err(ResolventError::HorizonTooShort { mu: tab.mu, value });
        }
        let sd = tab.sdot.as_ref().unwrap();
        let sdd = tab.sddot.as_ref().unwrap();
        let mu = tab.mu;
        rows.push(NormRow {
            mu,
            s_l1: trapezoid(t, |j| tab.s[j].abs(), 0),
            sdot_l1: trapezoid(t, |j| sd[j].abs(), 0),
            t_sdot_l1: trapezoid(t, |j| t[j] * sd[j].abs(), 0),
            t_sddot_l1: mu * m1.abs() + trapezoid(t, |j| t[j] * sdd[j].abs(), 1),
            t2_sddot_l1: mu * m2.abs() + trapezoid(t, |j| t[j] * t[j] * sdd[j].abs(), 1),
            sup_abs_s: tab.sup_abs(),
            s_at_horizon: value,
            tail_sdot: value.abs(),
        });
    }
    let mus: Vec<f64> = rows.iter().map(|r| r.mu).collect();
    let targets: [(&str, f64, fn(&NormRow) -> f64); 5] = [
        ("s_l1", -1.0 / rho, |r| r.s_l1),
        ("sdot_l1", 0.0, |r| r.sdot_l1),
        ("t_sdot_l1", -1.0 / rho, |r| r.t_sdot_l1),
        ("t_sddot_l1", 0.0, |r| r.t_sddot_l1),
        ("t2_sddot_l1", -1.0 / rho, |r| r.t2_sddot_l1),
    ];
    let slopes = targets
        .iter()
        .map(|(name, target, get)| {
            let ys: Vec<f64> = rows.iter().map(get).collect();
            let f = fit::loglog(&mus, &ys).ok_or_else(|| ResolventError::Invalid(format!("cannot fit {name}")))?;
            Ok(SlopeCheck {
                name: name.to_string(),
                slope: f.slope,
                target: *target,
                fit: f,
            })
        })
        .collect::<Result<_, ResolventError>>()?;
    Ok(ScalingReport {
        kernel: kernel.name(),
        rho,
        max_abs_s: rows.iter().fold(0.0, |m, r| m.max(r.sup_abs_s)),
        rows,
        slopes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mittag_leffler::mittag_leffler;

    fn max_ml_error(rho: f64, mu: f64, n: usize) -> f64 {
        let grid = TimeGrid::uniform(2.0, n).unwrap();
        let tab = solve_scalar(&KernelSpec::riesz(rho), mu, &grid).unwrap();
        tab.t()
            .iter()
            .zip(&tab.s)
            .map(|(&t, &s)| (s - mittag_leffler(rho, -mu * t.powf(rho)).unwrap()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn starts_at_one_and_degenerate_mu() {
        let grid = TimeGrid::uniform(1.0, 16).unwrap();
        let k = KernelSpec::riesz(1.5);
        let tab = solve_scalar(&k, 0.0, &grid).unwrap();
        assert!(tab.s.iter().all(|&v| v == 1.0));
        assert!(tab.sdot.unwrap().iter().all(|&v| v == 0.0));
        let tab = solve_scalar(&k, 3.0, &grid).unwrap();
        assert_eq!(tab.s[0], 1.0);
        assert!(tab.sddot.unwrap()[0].is_nan());
    }

    #[test]
    fn mittag_leffler_oracle_small() {
        assert!(max_ml_error(1.5, 1.0, 512) < 1e-3);
        let e1 = max_ml_error(1.5, 10.0, 256);
        let e2 = max_ml_error(1.5, 10.0, 512);
        assert!(e1 / e2 > 3.0, "{e1} {e2}");
    }

    #[test]
    fn graded_matches_uniform_route() {
        // The packed weights on a grid given as graded with exponent > 1 must
        // agree with the Mittag-Leffler function too.
        let grid = TimeGrid::graded(2.0, 400, 1.5).unwrap();
        let tab = solve_scalar(&KernelSpec::riesz(1.4), 5.0, &grid).unwrap();
        for (&t, &s) in tab.t().iter().zip(&tab.s) {
            assert!((s - mittag_leffler(1.4, -5.0 * t.powf(1.4)).unwrap()).abs() < 2e-3);
        }
    }

    #[test]
    fn rescaling_is_exact() {
        let rho = 1.5;
        let mu: f64 = 37.0;
        let k = KernelSpec::riesz(rho);
        let grid = TimeGrid::uniform(1.0, 200).unwrap();
        let a = solve_scalar(&k, mu, &grid).unwrap();
        let b = solve_scalar(&k, 1.0, &grid.scaled(mu.powf(1.0 / rho)).unwrap()).unwrap();
        for (x, y) in a.s.iter().zip(&b.s) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn coarse_grid_flagged() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let err = solve_scalar(&KernelSpec::riesz(1.5), 1e4, &grid).unwrap_err();
        assert!(matches!(err, ResolventError::GridTooCoarse { .. }));
    }

    #[test]
    fn residual_small_with_finer_rule() {
        let grid = TimeGrid::uniform(1.0, 256).unwrap();
        let k = KernelSpec::FiniteHistory { rho: 1.5 };
        let tab = solve_scalar(&k, 20.0, &grid).unwrap();
        let r = residual_check(&k, &tab, &[10, 100, 256]).unwrap();
        assert!(r < 1e-5, "{r}");
    }

    #[test]
    fn contraction_bound() {
        let grid = TimeGrid::uniform(5.0, 1000).unwrap();
        for k in [KernelSpec::riesz(1.8), KernelSpec::FiniteHistory { rho: 1.3 }] {
            for mu in [1.0, 50.0, 300.0] {
                let tab = solve_scalar(&k, mu, &grid).unwrap();
                assert!(tab.sup_abs() <= 1.0 + 1e-6);
            }
        }
    }
}
