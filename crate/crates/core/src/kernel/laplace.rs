//! Laplace-side evaluation: transforms, their derivatives and inversion.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{integrate_from_zero, KernelError, KernelSpec, LaplaceKernel};
use crate::quad::{self, ErrorSlot, Tolerance};
use crate::special::gamma;

const TALBOT_NODES: usize = 24;
const CAUCHY_POINTS: usize = 64;

pub(super) fn eval_laplace(k: &KernelSpec, lambda: Complex64) -> Result<Complex64, KernelError> {
    Ok(eval_laplace_derivatives(k, lambda, 0)?[0])
}

pub(super) fn eval_laplace_derivatives(
    k: &KernelSpec,
    lambda: Complex64,
    max_order: usize,
) -> Result<[Complex64; 4], KernelError> {
    if !(lambda.re > 0.0) {
        return Err(KernelError::NonanalyticPoint(lambda.re));
    }
    if max_order > 3 {
        return Err(KernelError::DerivativeUnavailable(format!("order {max_order} > 3")));
    }
    let mut out = [Complex64::new(0.0, 0.0); 4];
    match k {
        KernelSpec::TemperedRiesz { rho, eta } => {
            let z = lambda + eta;
            let mut c = Complex64::new(1.0, 0.0);
            let mut p = 1.0 - rho;
            for (j, slot) in out.iter_mut().enumerate().take(max_order + 1) {
                *slot = c * z.powf(p);
                if j < 3 {
                    c *= p;
                    p -= 1.0;
                }
            }
        }
        KernelSpec::FiniteHistory { rho } => {
            for (j, slot) in out.iter_mut().enumerate().take(max_order + 1) {
                *slot = finite_history_laplace(*rho, lambda, j)?;
            }
        }
        KernelSpec::LaplaceDefined(lk) => {
            out[0] = (lk.symbol)(lambda);
            if max_order > 0 {
                let d = cauchy_derivatives(lk, lambda, max_order);
                out[1..=max_order].copy_from_slice(&d[1..=max_order]);
            }
        }
        KernelSpec::Tabulated(tab) => {
            let tol = Tolerance::new(1e-15, 1e-11).with_max_intervals(20_000);
            for (j, slot) in out.iter_mut().enumerate().take(max_order + 1) {
                let errs = ErrorSlot::new();
                let r = quad::integrate_pieces(
                    |t: f64| (-lambda * t).exp() * (-t).powi(j as i32) * errs.take(tab.eval(t)),
                    &tab.times,
                    tol,
                )?;
                errs.finish()?;
                *slot = r.value;
            }
        }
    }
    Ok(out)
}

/// Derivatives from the trapezoid rule on a circle around `λ`.
///
/// The radius stays well inside the analyticity region: a quarter of `|λ|`
/// (the branch cut lies on the negative axis) and half the distance to the
/// nearest known pole.
fn cauchy_derivatives(lk: &LaplaceKernel, lambda: Complex64, max_order: usize) -> [Complex64; 4] {
    let mut radius = 0.25 * lambda.norm();
    for &(p, _) in &lk.poles {
        radius = radius.min(0.5 * (lambda - p).norm()).min(0.5 * (lambda - p.conj()).norm());
    }
    let mut acc = [Complex64::new(0.0, 0.0); 4];
    for i in 0..CAUCHY_POINTS {
        let phi = 2.0 * PI * i as f64 / CAUCHY_POINTS as f64;
        let e = Complex64::from_polar(1.0, phi);
        let v = (lk.symbol)(lambda + radius * e);
        for (j, slot) in acc.iter_mut().enumerate().take(max_order + 1) {
            *slot += v * e.powi(-(j as i32));
        }
    }
    let mut fact = 1.0;
    for (j, slot) in acc.iter_mut().enumerate() {
        if j > 0 {
            fact *= j as f64;
        }
        *slot *= fact / (CAUCHY_POINTS as f64 * radius.powi(j as i32));
    }
    acc
}

fn finite_history_laplace(rho: f64, lambda: Complex64, j: usize) -> Result<Complex64, KernelError> {
    if lambda.norm() <= 50.0 {
        fh_laplace_quadrature(rho, lambda, j)
    } else {
        Ok(fh_laplace_asymptotic(rho, lambda, j))
    }
}

fn fh_laplace_quadrature(rho: f64, lambda: Complex64, j: usize) -> Result<Complex64, KernelError> {
    let a = (rho - 2.0) / 3.0;
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    integrate_from_zero(
        |t| Ok((-lambda * t).exp() * (sign * t.powi(j as i32) * (t.powf(a) - 1.0).powi(3))),
        1.0,
        rho - 2.0,
        Tolerance::new(1e-16, 1e-12),
    )
}

fn fh_laplace_asymptotic(rho: f64, lambda: Complex64, j: usize) -> Complex64 {
    let a = (rho - 2.0) / 3.0;
    let terms = [(1.0, 3.0 * a), (-3.0, 2.0 * a), (3.0, a), (-1.0, 0.0)];
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    // ∫₀¹ = ∫₀^∞ − ∫₁^∞. The tail has the asymptotic series
    // e^{−λ} Σ f⁽ⁿ⁾(1)/λ^{n+1} with f(t) = tʲ(tᵃ−1)³, whose first three
    // coefficients vanish; summing them per term would cancel badly.
    let mut head = Complex64::new(0.0, 0.0);
    for &(c, e) in &terms {
        let p = e + j as f64;
        head += c * gamma(p + 1.0) * lambda.powf(-(p + 1.0));
    }
    let mut falling = terms.map(|(_, e)| (e + j as f64, 1.0));
    let mut tail = Complex64::new(0.0, 0.0);
    let mut term = 1.0 / lambda;
    let mut best = f64::INFINITY;
    for n in 0..60 {
        if n >= 3 {
            let coeff: f64 = terms.iter().zip(&falling).map(|(&(c, _), &(_, f))| c * f).sum();
            let add = coeff * term;
            if add.norm() > best {
                break;
            }
            best = add.norm();
            tail += add;
            if best < 1e-18 * tail.norm() {
                break;
            }
        }
        for (p, f) in falling.iter_mut() {
            *f *= *p - n as f64;
        }
        term /= lambda;
    }
    sign * (head - (-lambda).exp() * tail)
}

/// Inverse Laplace transform of `b̂(λ)/λ^order` at `t > 0` by the fixed Talbot
/// contour. Poles off the negative axis are removed analytically first so
/// that the contour never has to enclose them.
pub fn talbot_inverse(lk: &LaplaceKernel, order: i32, t: f64) -> Result<f64, KernelError> {
    if !(t > 0.0) {
        return Err(KernelError::NonPositiveTime(t));
    }
    let m = TALBOT_NODES;
    let r = 2.0 * m as f64 / (5.0 * t);
    let pole_part = |l: Complex64| -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for &(p, res) in &lk.poles {
            let c = res * p.powi(-order);
            s += c / (l - p) + c.conj() / (l - p.conj());
        }
        s
    };
    let f = |l: Complex64| (lk.symbol)(l) * l.powi(-order) - pole_part(l);
    let mut sum = 0.5 * (f(Complex64::new(r, 0.0)) * (r * t).exp()).re;
    for k in 1..m {
        let theta = k as f64 * PI / m as f64;
        let cot = 1.0 / theta.tan();
        let s = r * theta * Complex64::new(cot, 1.0);
        let sigma = theta + (theta * cot - 1.0) * cot;
        sum += ((s * t).exp() * f(s) * Complex64::new(1.0, sigma)).re;
    }
    let mut value = r / m as f64 * sum;
    for &(p, res) in &lk.poles {
        let c = res * p.powi(-order);
        value += 2.0 * (c * (p * t).exp()).re;
    }
    if !value.is_finite() {
        return Err(KernelError::QuadratureFailure(format!(
            "contour inversion non-finite at t = {t}"
        )));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::rgamma;
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn riesz_derivatives_closed_form() {
        let k = KernelSpec::TemperedRiesz { rho: 1.5, eta: 0.3 };
        let l = c(0.7, 2.0);
        let d = k.laplace_derivatives(l, 3).unwrap();
        let z = l + 0.3;
        assert!((d[0] - z.powf(-0.5)).norm() < 1e-15);
        assert!((d[3] - (-0.5) * (-1.5) * (-2.5) * z.powf(-3.5)).norm() < 1e-14);
    }

    #[test]
    fn nonanalytic_point_rejected() {
        let k = KernelSpec::riesz(1.5);
        assert!(matches!(k.laplace(c(0.0, 1.0)), Err(KernelError::NonanalyticPoint(_))));
        assert!(matches!(k.laplace(c(-1.0, 0.0)), Err(KernelError::NonanalyticPoint(_))));
    }

    #[test]
    fn cauchy_matches_closed_form() {
        let lk = LaplaceKernel::new("riesz", Arc::new(|l: Complex64| l.powf(-0.6)));
        let k = KernelSpec::LaplaceDefined(lk);
        let exact = KernelSpec::riesz(1.6);
        for &l in &[c(1e-8, 1.0), c(2.0, -30.0), c(1e-3, 1e4)] {
            let a = k.laplace_derivatives(l, 3).unwrap();
            let b = exact.laplace_derivatives(l, 3).unwrap();
            for j in 0..4 {
                assert!((a[j] - b[j]).norm() < 1e-12 * b[j].norm(), "j={j} λ={l}");
            }
        }
    }

    #[test]
    fn finite_history_transform_branches_agree() {
        for &rho in &[1.3, 1.5, 1.8] {
            for j in 0..4 {
                for &l in &[c(1e-6, 50.0), c(1e-8, 120.0), c(30.0, 60.0)] {
                    let q = fh_laplace_quadrature(rho, l, j).unwrap();
                    let a = fh_laplace_asymptotic(rho, l, j);
                    assert!((q - a).norm() < 1e-7 * q.norm(), "rho {rho} j {j} λ {l}: {q} {a}");
                }
            }
        }
    }

    #[test]
    fn talbot_recovers_power_law() {
        let lk = LaplaceKernel::new("riesz", Arc::new(|l: Complex64| l.powf(-0.5)));
        for &t in &[1e-4f64, 0.3, 2.0, 100.0] {
            for order in 0..=3 {
                let p = -0.5 + order as f64;
                let exact = t.powf(p) * rgamma(p + 1.0);
                let v = talbot_inverse(&lk, order, t).unwrap();
                assert!((v - exact).abs() < 1e-9 * exact.abs(), "t={t} k={order}: {v} {exact}");
            }
        }
    }

    #[test]
    fn example_kernel_poles_and_inversion() {
        let lk = LaplaceKernel::reference_example();
        // Zeros of the denominator, located independently with a 30-digit root finder.
        assert_eq!(lk.poles.len(), 2);
        assert!((lk.poles[0].0 - c(-0.082_789_006_533_029_6, 0.341_392_706_361_607)).norm() < 1e-12);
        assert!((lk.poles[1].0 - c(-1.038_848_273_003_69, 0.838_302_123_312_014)).norm() < 1e-12);
        // B1(t2) − B1(t1) = ∫ b over [t1, t2]; checks the inversion at large t too.
        for &(t1, t2) in &[(0.5, 1.0), (20.0, 30.0), (200.0, 260.0)] {
            let lhs = talbot_inverse(&lk, 1, t2).unwrap() - talbot_inverse(&lk, 1, t1).unwrap();
            let rhs = quad::integrate(
                |s| talbot_inverse(&lk, 0, s).unwrap(),
                t1,
                t2,
                Tolerance::new(1e-13, 1e-10),
            )
            .unwrap()
            .value;
            assert!((lhs - rhs).abs() < 1e-8 * rhs.abs().max(1.0), "[{t1},{t2}]: {lhs} {rhs}");
        }
    }
}
