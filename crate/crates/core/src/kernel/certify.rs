//! Numerical checks of the structural kernel assumptions: sector angle,
//! k-regularity, the growth integrals, k-monotonicity and the quotient
//! condition near 0 and ∞.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::{KernelError, KernelSpec};
use crate::fit::{self, LineFit};
use crate::quad::{self, ErrorSlot, Tolerance};

/// Where `b̂` is sampled in the right half plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourSampling {
    pub r_min: f64,
    pub r_max: f64,
    pub per_decade: usize,
    /// Number of rays `arg λ = θ` with `θ ∈ [0, π/2)`, in addition to the boundary.
    pub rays: usize,
    /// Boundary samples use `λ = |k|(ε + i)`.
    pub boundary_eps: f64,
}

impl Default for ContourSampling {
    fn default() -> Self {
        Self {
            r_min: 1e-6,
            r_max: 1e6,
            per_decade: 20,
            rays: 6,
            boundary_eps: 1e-8,
        }
    }
}

impl ContourSampling {
    fn radii(&self) -> Vec<f64> {
        let decades = (self.r_max / self.r_min).log10();
        let n = (decades * self.per_decade as f64).ceil() as usize + 1;
        fit::logspace(self.r_min, self.r_max, n.max(2))
    }

    /// Upper half of the sample set; conjugate symmetry covers the rest.
    fn points(&self) -> Vec<Complex64> {
        let mut out = Vec::new();
        for r in self.radii() {
            for j in 0..self.rays {
                let theta = 0.5 * PI * j as f64 / self.rays as f64;
                out.push(Complex64::from_polar(r, theta));
            }
            out.push(boundary_point(r, self.boundary_eps));
        }
        out
    }

    fn refined(&self) -> Self {
        Self {
            per_decade: 2 * self.per_decade,
            rays: 2 * self.rays,
            ..*self
        }
    }
}

fn boundary_point(k: f64, eps: f64) -> Complex64 {
    Complex64::new(eps * k, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectorReport {
    pub angle: f64,
    pub rho_sector: f64,
    /// `λ` at which the largest `|arg b̂|` was seen.
    pub argmax_re: f64,
    pub argmax_im: f64,
    /// `|arg b̂|` as `|λ| → ∞` on the boundary, from the leading power of
    /// `b` at the origin. Sampling approaches it slowly for some kernels.
    pub angle_limit: Option<f64>,
}

/// Sampled `sup |arg b̂(λ)|` over the right half plane and `1 + 2·angle/π`.
pub fn sector_angle(k: &KernelSpec, sampling: &ContourSampling) -> Result<SectorReport, KernelError> {
    let mut best = (0.0f64, Complex64::new(1.0, 0.0));
    for l in sampling.points() {
        let a = k.laplace(l)?.arg().abs();
        if a > best.0 {
            best = (a, l);
        }
    }
    // Golden-section refinement along the boundary around the best boundary sample.
    let radii = sampling.radii();
    let mut boundary_best = (0.0f64, 0usize);
    for (i, &r) in radii.iter().enumerate() {
        let a = k.laplace(boundary_point(r, sampling.boundary_eps))?.arg().abs();
        if a > boundary_best.0 {
            boundary_best = (a, i);
        }
    }
    let i = boundary_best.1;
    let lo = radii[i.saturating_sub(1)].ln();
    let hi = radii[(i + 1).min(radii.len() - 1)].ln();
    let eval = |x: f64| -> Result<f64, KernelError> {
        Ok(k.laplace(boundary_point(x.exp(), sampling.boundary_eps))?.arg().abs())
    };
    let (x, a) = golden_max(eval, lo, hi, 60)?;
    if a > best.0 {
        best = (a, boundary_point(x.exp(), sampling.boundary_eps));
    }
    // b ~ c t^e with c > 0 gives b̂ ~ c Γ(e+1) λ^{−e−1}.
    let angle_limit = k.nominal_rho().map(|rho| 0.5 * PI * (rho - 1.0).abs());
    let angle = best.0.max(angle_limit.unwrap_or(0.0));
    Ok(SectorReport {
        angle,
        rho_sector: 1.0 + 2.0 * angle / PI,
        angle_limit,
        argmax_re: best.1.re,
        argmax_im: best.1.im,
    })
}

fn golden_max<F>(f: F, mut a: f64, mut b: f64, iters: usize) -> Result<(f64, f64), KernelError>
where
    F: Fn(f64) -> Result<f64, KernelError>,
{
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc > fd { (c, fc) } else { (d, fd) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityConstant {
    pub order: usize,
    pub sup: f64,
    /// Supremum on the doubled sampling.
    pub refined_sup: f64,
    pub stable: bool,
}

fn regularity_sups(k: &KernelSpec, order: usize, sampling: &ContourSampling) -> Result<Vec<f64>, KernelError> {
    let mut sups = vec![0.0f64; order + 1];
    for l in sampling.points() {
        let d = k.laplace_derivatives(l, order)?;
        let base = d[0].norm();
        for j in 0..=order {
            let v = l.norm().powi(j as i32) * d[j].norm() / base;
            if !v.is_finite() {
                return Err(KernelError::DerivativeUnavailable(format!(
                    "non-finite ratio for order {j} at λ = {l}"
                )));
            }
            sups[j] = sups[j].max(v);
        }
    }
    Ok(sups)
}

/// Sampled `sup |λ|ʲ |b̂⁽ʲ⁾(λ)| / |b̂(λ)|` for `j ≤ order`, with a stability check
/// under doubling of the sampling density.
pub fn check_k_regularity(
    k: &KernelSpec,
    order: usize,
    sampling: &ContourSampling,
) -> Result<Vec<RegularityConstant>, KernelError> {
    if order > 3 {
        return Err(KernelError::DerivativeUnavailable(format!("order {order} > 3")));
    }
    let coarse = regularity_sups(k, order, sampling)?;
    let fine = regularity_sups(k, order, &sampling.refined())?;
    Ok(coarse
        .iter()
        .zip(&fine)
        .enumerate()
        .map(|(j, (&c, &f))| RegularityConstant {
            order: j,
            sup: c,
            refined_sup: f,
            stable: (f - c).abs() <= 0.05 * f.abs(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthOptions {
    pub mu_grid: Vec<f64>,
    /// Relative offset `ε` of the boundary samples `λ = |k|(ε + i)`.
    pub eps: f64,
    /// Second offset used to validate the boundary limit.
    pub eps_check: f64,
    /// Largest allowed growth rate of the products (log-log slope) at the ends of the μ-grid.
    pub slope_tolerance: f64,
    /// Number of μ values at each end used for the end slopes.
    pub end_points: usize,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        Self {
            mu_grid: fit::logspace(1e-8, 1e12, 41),
            eps: 1e-8,
            eps_check: 1e-9,
            slope_tolerance: 0.01,
            end_points: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateVerdict {
    pub rho: f64,
    /// `μ·I₁(μ)` per grid point.
    pub product1: Vec<f64>,
    /// `μ^{1+1/ρ}·I₂(μ)` per grid point.
    pub product2: Vec<f64>,
    pub spread1: f64,
    pub spread2: f64,
    pub low_slope2: f64,
    pub high_slope2: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub mu: Vec<f64>,
    pub i1: Vec<f64>,
    pub i2: Vec<f64>,
    /// Log-log slopes of `I₂` at the small-μ and large-μ ends.
    pub low_slope_i2: f64,
    pub high_slope_i2: f64,
    pub low_slope_mu_i1: f64,
    pub high_slope_mu_i1: f64,
    /// Set when `b̂` stays bounded at the origin. Then `I₂ ~ μ⁻²` as `μ → 0`
    /// for every kernel, so only `μ ≥ 1` is swept and only the large-μ end
    /// is judged.
    pub bounded_at_origin: bool,
    /// ρ read off the `I₂` end slope: the small-μ end, or the large-μ end
    /// when `bounded_at_origin`.
    pub rho_growth: f64,
    pub candidates: Vec<CandidateVerdict>,
    /// Smallest `p ∈ {1,2,4,8}` with `g/(|k|+|g|) ∈ L^p`, if any.
    pub lp_order: Option<u32>,
}

impl GrowthReport {
    /// Pass/fail boundary of the sweep: the largest passing candidate, or
    /// the smallest one when only the large-μ end is judged.
    pub fn boundary(&self) -> Option<f64> {
        let pass = self.candidates.iter().filter(|c| c.pass).map(|c| c.rho);
        if self.bounded_at_origin {
            pass.reduce(f64::min)
        } else {
            pass.reduce(f64::max)
        }
    }
}

/// `|g^{(j)}(k)|` for `j ≤ 3` on the boundary `λ = k(ε + i)`.
fn boundary_derivs(kern: &KernelSpec, k: f64, eps: f64) -> Result<[f64; 4], KernelError> {
    let d = kern.laplace_derivatives(boundary_point(k, eps), 3)?;
    Ok([d[0].norm(), d[1].norm(), d[2].norm(), d[3].norm()])
}

fn growth_integrands(g: &[f64; 4], k: f64, mu: f64) -> (f64, f64) {
    let den = (k + mu * g[0]).powi(2);
    let i1 = g[0] / den;
    let i2 = (k * k * g[3] + k * g[2] + g[1] + 1.0 / mu) / den;
    (i1, i2)
}

/// `∫₀^∞ f(k) dk` for a positive integrand concentrated around `k*`, in the
/// variable `x = ln k` with a geometric tail estimate beyond the truncation.
fn integrate_log_axis<F>(f: F, center: f64) -> Result<f64, KernelError>
where
    F: Fn(f64) -> Result<f64, KernelError>,
{
    let h = |x: f64| -> Result<f64, KernelError> { Ok(f(x.exp())? * x.exp()) };
    let step = 4.0;
    let peak = h(center)?.max(1e-300);
    let mut lo = center - step;
    let mut hi = center + step;
    while lo > center - 300.0 && h(lo)? > 1e-13 * peak {
        lo -= step;
    }
    while hi < center + 300.0 && h(hi)? > 1e-13 * peak {
        hi += step;
    }
    let n = ((hi - lo) / step).round() as usize;
    let pts: Vec<f64> = (0..=n).map(|i| lo + step * i as f64).collect();
    let slot = ErrorSlot::new();
    // Integrands built from quadrature-based transforms carry round-off
    // noise; a piece that stalls is kept if the summed error stays within
    // 1e-5 of the total.
    let (mut value, mut error) = (0.0, 0.0);
    for w in pts.windows(2) {
        match quad::integrate(|x| slot.take(h(x)), w[0], w[1], Tolerance::new(0.0, 1e-10)) {
            Ok(r) => {
                value += r.value;
                error += r.error;
            }
            Err(quad::QuadError::Tolerance { estimate, error: e, .. }) => {
                value += estimate;
                error += e;
            }
            Err(e) => return Err(e.into()),
        }
    }
    slot.finish()?;
    if !(error <= 1e-5 * value.abs()) {
        return Err(quad::QuadError::Tolerance { estimate: value, error, intervals: 0 }.into());
    }
    // Tails: h decays like e^{−d|x|} beyond the ends.
    let mut total = value;
    for (end, inner) in [(lo, lo + 1.0), (hi, hi - 1.0)] {
        let (he, hin) = (h(end)?, h(inner)?);
        if he > 0.0 && hin > he {
            total += he / (hin / he).ln();
        }
    }
    Ok(total)
}

fn crossing_scale(kern: &KernelSpec, mu: f64, eps: f64) -> Result<f64, KernelError> {
    // Solve ln k = ln(μ |g(k)|) by bisection on ln k.
    let phi = |x: f64| -> Result<f64, KernelError> {
        let g = kern.laplace(boundary_point(x.exp(), eps))?.norm();
        Ok(x - (mu * g).ln())
    };
    let (mut a, mut b) = (-80.0, 80.0);
    let (fa, fb) = (phi(a)?, phi(b)?);
    if fa >= 0.0 {
        return Ok(a);
    }
    if fb <= 0.0 {
        return Ok(b);
    }
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if phi(m)? < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

fn growth_integrals(kern: &KernelSpec, mu: f64, eps: f64) -> Result<(f64, f64), KernelError> {
    let center = crossing_scale(kern, mu, eps)?;
    let i1 = integrate_log_axis(
        |k| Ok(growth_integrands(&boundary_derivs(kern, k, eps)?, k, mu).0),
        center,
    )?;
    let i2 = integrate_log_axis(
        |k| Ok(growth_integrands(&boundary_derivs(kern, k, eps)?, k, mu).1),
        center,
    )?;
    Ok((i1, i2))
}

fn end_slopes(x: &[f64], y: &[f64], m: usize) -> (f64, f64) {
    let n = x.len();
    let m = m.clamp(2, n);
    let low = fit::loglog(&x[..m], &y[..m]).map_or(f64::NAN, |f| f.slope);
    let high = fit::loglog(&x[n - m..], &y[n - m..]).map_or(f64::NAN, |f| f.slope);
    (low, high)
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::MIN, f64::max);
    let min = v.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

/// Evaluates the two growth integrals on the μ-grid and judges each candidate ρ.
///
/// A candidate passes when `μ I₁` and `μ^{1+1/ρ} I₂` do not grow towards
/// either end of the grid: the log-log end slope is at least `−tol` at the
/// small-μ end and at most `tol` at the large-μ end.
pub fn check_growth_conditions(
    kern: &KernelSpec,
    rho_candidates: &[f64],
    opts: &GrowthOptions,
) -> Result<GrowthReport, KernelError> {
    let g_small = |k: f64| kern.laplace(boundary_point(k, opts.eps)).map(|z| z.norm());
    let bounded_at_origin = ((g_small(1e-6)? / g_small(1e-8)?) - 1.0).abs() < 1e-3;
    let mu: Vec<f64> = if bounded_at_origin {
        opts.mu_grid.iter().cloned().filter(|&m| m >= 1.0).collect()
    } else {
        opts.mu_grid.clone()
    };
    if mu.len() < 2 * opts.end_points.max(2) {
        return Err(KernelError::InvalidParameter("μ-grid too short for end slopes".into()));
    }
    let mut i1 = Vec::with_capacity(mu.len());
    let mut i2 = Vec::with_capacity(mu.len());
    for &m in &mu {
        let (a, b) = growth_integrals(kern, m, opts.eps)?;
        i1.push(a);
        i2.push(b);
    }
    // Boundary limit: compare against a smaller ε at the ends and the middle.
    for idx in [0, mu.len() / 2, mu.len() - 1] {
        let (a, b) = growth_integrals(kern, mu[idx], opts.eps_check)?;
        let rel = ((a - i1[idx]) / i1[idx]).abs().max(((b - i2[idx]) / i2[idx]).abs());
        if !(rel <= 1e-4) {
            return Err(KernelError::BoundaryLimitUnstable {
                k: crossing_scale(kern, mu[idx], opts.eps)?.exp(),
                rel,
            });
        }
    }
    let mu_i1: Vec<f64> = mu.iter().zip(&i1).map(|(m, v)| m * v).collect();
    let (low_slope_i2, high_slope_i2) = end_slopes(&mu, &i2, opts.end_points);
    let (low_slope_mu_i1, high_slope_mu_i1) = end_slopes(&mu, &mu_i1, opts.end_points);
    let tol = opts.slope_tolerance;
    let low_ok = |slope: f64| bounded_at_origin || slope >= -tol;
    let i1_ok = low_ok(low_slope_mu_i1) && high_slope_mu_i1 <= tol;
    let candidates = rho_candidates
        .iter()
        .map(|&rho| {
            let e = 1.0 + 1.0 / rho;
            let product2: Vec<f64> = mu.iter().zip(&i2).map(|(m, v)| m.powf(e) * v).collect();
            let low = low_slope_i2 + e;
            let high = high_slope_i2 + e;
            CandidateVerdict {
                rho,
                spread1: spread(&mu_i1),
                spread2: spread(&product2),
                product1: mu_i1.clone(),
                product2,
                low_slope2: low,
                high_slope2: high,
                pass: i1_ok && low_ok(low) && high <= tol,
            }
        })
        .collect();
    Ok(GrowthReport {
        bounded_at_origin,
        rho_growth: 1.0 / (-1.0 - if bounded_at_origin { high_slope_i2 } else { low_slope_i2 }),
        mu,
        i1,
        i2,
        low_slope_i2,
        high_slope_i2,
        low_slope_mu_i1,
        high_slope_mu_i1,
        candidates,
        lp_order: lp_order(kern, opts.eps)?,
    })
}

fn lp_order(kern: &KernelSpec, eps: f64) -> Result<Option<u32>, KernelError> {
    // Decay exponent of |g|/(k+|g|) at large k; near 0 the quotient is bounded.
    let q = |k: f64| -> Result<f64, KernelError> {
        let g = kern.laplace(boundary_point(k, eps))?.norm();
        Ok(g / (k + g))
    };
    let (k1, k2) = (1e6, 1e8);
    let d = -(q(k2)?.ln() - q(k1)?.ln()) / (k2 / k1).ln();
    Ok([1u32, 2, 4, 8].into_iter().find(|&p| p as f64 * d > 1.0 + 1e-3))
}

/// Largest `k ≤ 4` such that `(−1)ⁿ b⁽ⁿ⁾ ≥ 0` for all `n ≤ k` on the grid
/// (divided differences, roundoff-scaled tolerance); 0 if positivity fails.
pub fn check_monotonicity(kern: &KernelSpec, grid: &[f64]) -> usize {
    let grid: Vec<f64> = match kern {
        KernelSpec::Tabulated(t) => t.times().iter().cloned().filter(|&x| x > 0.0).collect(),
        _ => grid.to_vec(),
    };
    let vals: Vec<f64> = match grid.iter().map(|&t| kern.eval(t)).collect() {
        Ok(v) => v,
        Err(_) => return 0,
    };
    let mut order = 0;
    for n in 0..=4usize {
        if grid.len() < n + 1 {
            break;
        }
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let ok = (0..grid.len() - n).all(|i| {
            let ts = &grid[i..=i + n];
            let mut value = 0.0;
            let mut scale = 0.0;
            for (a, &ta) in ts.iter().enumerate() {
                let w: f64 = ts
                    .iter()
                    .enumerate()
                    .filter(|&(b, _)| b != a)
                    .map(|(_, &tb)| 1.0 / (ta - tb))
                    .product();
                value += w * vals[i + a];
                scale += (w * vals[i + a]).abs();
            }
            sign * value >= -1e3 * f64::EPSILON * scale
        });
        if !ok {
            break;
        }
        order = n;
    }
    order
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BSmoothReport {
    pub t: Vec<f64>,
    pub ratio: Vec<f64>,
    /// Log-log slopes of the ratio over the first and last decade.
    pub slope_small_t: f64,
    pub slope_large_t: f64,
    pub bounded: bool,
}

/// `(1/t)∫₀ᵗ s b(s) ds / ∫₀ᵗ −s ḃ(s) ds` via `(B − B₂/t) / (B − t b)`.
pub fn b_smooth_ratio(kern: &KernelSpec, t_grid: &[f64]) -> Result<BSmoothReport, KernelError> {
    if matches!(kern, KernelSpec::Tabulated(_)) {
        return Err(KernelError::DerivativeUnavailable(
            "tabulated kernels carry no derivative information".into(),
        ));
    }
    let mut ratio = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let b1 = kern.primitive(1, t)?;
        let b2 = kern.primitive(2, t)?;
        let b = kern.eval(t)?;
        ratio.push((b1 - b2 / t) / (b1 - t * b));
    }
    let per_end = (t_grid.len() / 12).max(2);
    let (lo, hi) = end_slopes(t_grid, &ratio, per_end);
    let finite = ratio.iter().all(|r| r.is_finite() && *r > 0.0);
    Ok(BSmoothReport {
        t: t_grid.to_vec(),
        slope_small_t: lo,
        slope_large_t: hi,
        bounded: finite && lo >= -0.05 && hi <= 0.05,
        ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L1Scaling {
    pub t: Vec<f64>,
    pub norm: Vec<f64>,
    pub fit: Option<LineFit>,
}

/// `‖b‖_{L¹(0,t)}` on the grid and its log-log slope.
pub fn l1_norm_scaling(kern: &KernelSpec, t_grid: &[f64]) -> Result<L1Scaling, KernelError> {
    let norm = t_grid.iter().map(|&t| kern.l1_norm(t)).collect::<Result<Vec<_>, _>>()?;
    Ok(L1Scaling {
        fit: fit::loglog(t_grid, &norm),
        t: t_grid.to_vec(),
        norm,
    })
}

/// One row of the certification verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionEntry {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    /// Part of the kernel assumption itself. Monotonicity and the b-smooth
    /// ratio only give a sufficient route to it and are reported, not required.
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthRow {
    pub mu: f64,
    pub i1: f64,
    pub i2: f64,
    pub mu_i1: f64,
    pub mu_pow_i2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub kernel: String,
    pub sector_angle: f64,
    pub rho_sector: f64,
    pub rho_growth: f64,
    /// Pass/fail boundary of the candidate sweep, if any candidate passed.
    pub rho_growth_boundary: Option<f64>,
    pub regularity_constants: Vec<RegularityConstant>,
    /// Rows at `ρ = rho_growth`.
    pub growth_integral_bounds: Vec<GrowthRow>,
    pub growth_candidates: Vec<(f64, bool)>,
    pub lp_order: Option<u32>,
    pub monotone_order: usize,
    pub b_smooth_ratio: Option<BSmoothReport>,
    pub l1_slope: Option<f64>,
    pub conditions: Vec<ConditionEntry>,
}

impl AssumptionReport {
    pub fn passes(&self) -> bool {
        self.conditions.iter().all(|c| c.pass || !c.required)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyOptions {
    pub sampling: ContourSampling,
    pub growth: GrowthOptions,
    pub rho_candidates: Vec<f64>,
    pub monotone_grid: Vec<f64>,
    pub smooth_grid: Vec<f64>,
    pub l1_grid: Vec<f64>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            sampling: ContourSampling::default(),
            growth: GrowthOptions::default(),
            rho_candidates: (0..=90).map(|i| 1.05 + 0.01 * i as f64).collect(),
            monotone_grid: fit::logspace(1e-4, 20.0, 400),
            smooth_grid: fit::logspace(1e-6, 1e6, 49),
            l1_grid: fit::logspace(1e-6, 1e-2, 9),
        }
    }
}

/// Runs every check and assembles the verdict table.
pub fn certify(kern: &KernelSpec, opts: &CertifyOptions) -> Result<AssumptionReport, KernelError> {
    kern.validate()?;
    let sector = sector_angle(kern, &opts.sampling)?;
    let regularity = check_k_regularity(kern, 2, &opts.sampling)?;
    let growth = check_growth_conditions(kern, &opts.rho_candidates, &opts.growth)?;
    let monotone = check_monotonicity(kern, &opts.monotone_grid);
    let smooth = match b_smooth_ratio(kern, &opts.smooth_grid) {
        Ok(r) => Some(r),
        Err(KernelError::DerivativeUnavailable(_)) => None,
        Err(e) => return Err(e),
    };
    let l1 = l1_norm_scaling(kern, &opts.l1_grid)?;
    let integrable = kern.is_locally_integrable();

    let e = 1.0 + 1.0 / growth.rho_growth;
    let rows = growth
        .mu
        .iter()
        .zip(growth.i1.iter().zip(&growth.i2))
        .map(|(&mu, (&i1, &i2))| GrowthRow {
            mu,
            i1,
            i2,
            mu_i1: mu * i1,
            mu_pow_i2: mu.powf(e) * i2,
        })
        .collect();

    let mut conditions = vec![
        ConditionEntry {
            name: "locally_integrable".into(),
            value: kern.l1_norm(kern.support_end().min(1.0)).unwrap_or(f64::INFINITY),
            threshold: f64::INFINITY,
            pass: integrable,
            required: true,
        },
        ConditionEntry {
            name: "sector_angle".into(),
            value: sector.angle,
            threshold: 0.5 * PI,
            pass: sector.angle < 0.5 * PI,
            required: true,
        },
        ConditionEntry {
            name: "rho_sector_in_range".into(),
            value: sector.rho_sector,
            threshold: 2.0,
            pass: sector.rho_sector > 1.0 && sector.rho_sector < 2.0,
            required: true,
        },
        ConditionEntry {
            name: "rho_growth_in_range".into(),
            value: growth.rho_growth,
            threshold: 2.0,
            pass: growth.rho_growth > 1.0 && growth.rho_growth < 2.0,
            required: true,
        },
        ConditionEntry {
            name: "growth_mu_i1_bounded".into(),
            value: growth.low_slope_mu_i1.abs().max(growth.high_slope_mu_i1.abs()),
            threshold: opts.growth.slope_tolerance,
            pass: (growth.bounded_at_origin || growth.low_slope_mu_i1 >= -opts.growth.slope_tolerance)
                && growth.high_slope_mu_i1 <= opts.growth.slope_tolerance,
            required: true,
        },
        ConditionEntry {
            name: "lp_order".into(),
            value: growth.lp_order.map_or(f64::INFINITY, f64::from),
            threshold: 8.0,
            pass: growth.lp_order.is_some(),
            required: true,
        },
    ];
    for r in &regularity {
        conditions.push(ConditionEntry {
            name: format!("regularity_j{}", r.order),
            value: r.sup,
            threshold: f64::INFINITY,
            pass: r.stable && r.sup.is_finite(),
            required: true,
        });
    }
    conditions.push(ConditionEntry {
        name: "monotone_order".into(),
        value: monotone as f64,
        threshold: 4.0,
        pass: monotone >= 4,
        required: false,
    });
    if let Some(s) = &smooth {
        let max = s.ratio.iter().cloned().fold(0.0, f64::max);
        conditions.push(ConditionEntry {
            name: "b_smooth_ratio".into(),
            value: max,
            threshold: f64::INFINITY,
            pass: s.bounded,
            required: false,
        });
    }
    Ok(AssumptionReport {
        kernel: kern.name(),
        sector_angle: sector.angle,
        rho_sector: sector.rho_sector,
        rho_growth: growth.rho_growth,
        rho_growth_boundary: growth.boundary(),
        regularity_constants: regularity,
        growth_integral_bounds: rows,
        growth_candidates: growth.candidates.iter().map(|c| (c.rho, c.pass)).collect(),
        lp_order: growth.lp_order,
        monotone_order: monotone,
        b_smooth_ratio: smooth,
        l1_slope: l1.fit.map(|f| f.slope),
        conditions,
    })
}

/// `∫₀ᵗ s b(s) ds` and friends by direct quadrature; used as an oracle in tests.
#[cfg(test)]
pub(crate) fn brute_moment(kern: &KernelSpec, t: f64, power: i32) -> f64 {
    super::integrate_from_zero(
        |s| kern.eval(s).map(|b| s.powi(power) * b),
        t,
        kern.leading_power(),
        Tolerance::new(1e-16, 1e-12),
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{LaplaceKernel, TabulatedKernel};

    #[test]
    fn riesz_sector() {
        for &rho in &[1.2, 1.5, 1.8] {
            let r = sector_angle(&KernelSpec::riesz(rho), &ContourSampling::default()).unwrap();
            assert!((r.rho_sector - rho).abs() < 1e-3, "{rho}: {}", r.rho_sector);
        }
    }

    #[test]
    fn riesz_regularity_constants() {
        let s = ContourSampling {
            per_decade: 5,
            ..Default::default()
        };
        let c = check_k_regularity(&KernelSpec::riesz(1.5), 3, &s).unwrap();
        let expect = [1.0, 0.5, 0.75, 1.875];
        for (r, e) in c.iter().zip(expect) {
            assert!((r.sup - e).abs() < 1e-10, "j={}: {}", r.order, r.sup);
            assert!(r.stable);
        }
    }

    #[test]
    fn riesz_growth_products_scale_invariant() {
        let opts = GrowthOptions {
            mu_grid: fit::logspace(1e-2, 1e4, 10),
            ..Default::default()
        };
        let rep = check_growth_conditions(&KernelSpec::riesz(1.5), &[1.5], &opts).unwrap();
        let c = &rep.candidates[0];
        assert!(c.pass);
        for p in [&c.product1, &c.product2] {
            let first = p[0];
            for v in p {
                assert!((v - first).abs() < 1e-6 * first, "{v} vs {first}");
            }
        }
        assert!((rep.rho_growth - 1.5).abs() < 1e-6);
        assert_eq!(rep.lp_order, Some(1));
    }

    #[test]
    fn monotonicity_examples() {
        let grid = fit::logspace(1e-4, 20.0, 400);
        assert_eq!(check_monotonicity(&KernelSpec::riesz(1.5), &grid), 4);
        assert_eq!(check_monotonicity(&KernelSpec::FiniteHistory { rho: 1.5 }, &grid), 4);
        let t: Vec<f64> = (0..=200).map(|i| 10.0 * i as f64 / 200.0).collect();
        let v: Vec<f64> = t.iter().map(|x| x.cos()).collect();
        let tab = KernelSpec::Tabulated(TabulatedKernel::new(t, v).unwrap());
        assert_eq!(check_monotonicity(&tab, &grid), 0);
    }

    #[test]
    fn b_smooth_riesz_matches_quadrature() {
        let k = KernelSpec::riesz(1.5);
        let grid = fit::logspace(1e-6, 1e6, 13);
        let rep = b_smooth_ratio(&k, &grid).unwrap();
        assert!(rep.bounded);
        for (&t, &r) in grid.iter().zip(&rep.ratio) {
            // −∫ s ḃ = ∫ b − t b(t); both sides by quadrature.
            let num = brute_moment(&k, t, 1) / t;
            let den = brute_moment(&k, t, 0) - t * k.eval(t).unwrap();
            assert!((r - num / den).abs() < 1e-9, "t={t}");
            assert!((r - 2.0 / 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn b_smooth_finite_history_bounded() {
        let rep = b_smooth_ratio(&KernelSpec::FiniteHistory { rho: 1.5 }, &fit::logspace(1e-6, 1e6, 49)).unwrap();
        assert!(rep.bounded, "{:?}", (rep.slope_small_t, rep.slope_large_t));
    }

    #[test]
    fn b_smooth_tabulated_unavailable() {
        let tab = TabulatedKernel::new(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            b_smooth_ratio(&KernelSpec::Tabulated(tab), &[0.5]),
            Err(KernelError::DerivativeUnavailable(_))
        ));
    }

    #[test]
    fn l1_slopes() {
        let grid = fit::logspace(1e-6, 1e-2, 9);
        let s = l1_norm_scaling(&KernelSpec::riesz(1.5), &grid).unwrap();
        assert!((s.fit.unwrap().slope - 0.5).abs() < 0.01);
        let grid = fit::logspace(1e-6, 0.1, 9);
        let s = l1_norm_scaling(&KernelSpec::TemperedRiesz { rho: 1.5, eta: 2.0 }, &grid).unwrap();
        assert!((s.fit.unwrap().slope - 0.5).abs() < 0.02);
        let grid = fit::logspace(1.0, 10.0, 5);
        let s = l1_norm_scaling(&KernelSpec::FiniteHistory { rho: 1.5 }, &grid).unwrap();
        assert!(s.fit.unwrap().slope.abs() < 1e-10);
    }

    #[test]
    fn example_sector_value() {
        let k = KernelSpec::LaplaceDefined(LaplaceKernel::reference_example());
        let r = sector_angle(&k, &ContourSampling::default()).unwrap();
        assert!((r.rho_sector - 1.874).abs() < 0.01, "{}", r.rho_sector);
    }
}
