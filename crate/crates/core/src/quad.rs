//! Quadrature and summation primitives shared by every module.
//!
//! The adaptive rule is a globally adaptive 7/15-point Gauss–Kronrod scheme
//! that always bisects the interval with the largest error estimate. The
//! subdivision order only depends on the integrand values, so results are
//! bit-reproducible.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QuadError {
    #[error("quadrature did not reach tolerance: estimate {estimate:e} with error {error:e} after {intervals} intervals")]
    Tolerance {
        estimate: f64,
        error: f64,
        intervals: usize,
    },
    #[error("integrand returned a non-finite value at x = {0}")]
    NonFinite(f64),
}

/// Values that can be integrated: reals and complex numbers.
pub trait QuadValue:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Absolute and relative error targets plus an interval budget.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_intervals: 4000,
        }
    }

    pub fn with_max_intervals(mut self, n: usize) -> Self {
        self.max_intervals = n;
        self
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-13, 1e-11)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integral<T> {
    pub value: T,
    pub error: f64,
    pub intervals: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> Result<(T, f64), QuadError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    check_finite(fc, c)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        check_finite(f1, c - dx)?;
        check_finite(f2, c + dx)?;
        let s = f1 + f2;
        kronrod = kronrod + s * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + s * WG[j / 2];
        }
    }
    let value = kronrod * h;
    let err = ((kronrod - gauss) * h).magnitude();
    Ok((value, err))
}

fn check_finite<T: QuadValue>(v: T, x: f64) -> Result<(), QuadError> {
    if v.magnitude().is_finite() {
        Ok(())
    } else {
        Err(QuadError::NonFinite(x))
    }
}

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
    order: usize,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T> Eq for Segment<T> {}
impl<T> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.order.cmp(&self.order))
    }
}

/// Holds the first error raised inside an integrand, which must itself be
/// infallible for the integrator.
pub struct ErrorSlot<E>(RefCell<Option<E>>);

impl<E> ErrorSlot<E> {
    pub fn new() -> Self {
        Self(RefCell::new(None))
    }

    /// Unwraps `r`, remembering the error and substituting a default.
    pub fn take<T: Default>(&self, r: Result<T, E>) -> T {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.0.borrow_mut().get_or_insert(e);
                T::default()
            }
        }
    }

    pub fn finish(self) -> Result<(), E> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

impl<E> Default for ErrorSlot<E> {
    fn default() -> Self {
        Self::new()
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
pub fn integrate<T, F>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Integral<T>, QuadError>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    if a == b {
        return Ok(Integral {
            value: T::default(),
            error: 0.0,
            intervals: 0,
        });
    }
    let (v0, e0) = gk15(&f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value: v0,
        error: e0,
        order: 0,
    });
    let mut counter = 1usize;
    let mut total = v0;
    let mut total_err = e0;
    loop {
        if total_err <= tol.abs.max(tol.rel * total.magnitude()) {
            break;
        }
        if heap.len() >= tol.max_intervals {
            let v = sum_segments(&heap);
            return Err(QuadError::Tolerance {
                estimate: v.magnitude(),
                error: total_err,
                intervals: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            heap.push(worst);
            let v = sum_segments(&heap);
            return Err(QuadError::Tolerance {
                estimate: v.magnitude(),
                error: total_err,
                intervals: heap.len(),
            });
        }
        let (vl, el) = gk15(&f, worst.a, mid)?;
        let (vr, er) = gk15(&f, mid, worst.b)?;
        total = total - worst.value + vl + vr;
        total_err = total_err - worst.error + el + er;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: vl,
            error: el,
            order: counter,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: vr,
            error: er,
            order: counter + 1,
        });
        counter += 2;
    }
    // Re-sum from scratch in a fixed order to avoid drift from the running update.
    let mut segs: Vec<Segment<T>> = heap.into_vec();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut value = T::default();
    let mut error = 0.0;
    for s in &segs {
        value = value + s.value;
        error += s.error;
    }
    Ok(Integral {
        value,
        error,
        intervals: segs.len(),
    })
}

fn sum_segments<T: QuadValue>(heap: &BinaryHeap<Segment<T>>) -> T {
    heap.iter().fold(T::default(), |acc, s| acc + s.value)
}

/// Integrates over several consecutive pieces `[p0,p1], [p1,p2], ...`,
/// splitting the tolerance budget evenly.
pub fn integrate_pieces<T, F>(f: F, points: &[f64], tol: Tolerance) -> Result<Integral<T>, QuadError>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    let mut value = T::default();
    let mut error = 0.0;
    let mut intervals = 0;
    let pieces = points.len().saturating_sub(1).max(1) as f64;
    let local = Tolerance {
        abs: tol.abs / pieces,
        ..tol
    };
    for w in points.windows(2) {
        let r = integrate(&f, w[0], w[1], local)?;
        value = value + r.value;
        error += r.error;
        intervals += r.intervals;
    }
    Ok(Integral {
        value,
        error,
        intervals,
    })
}

const GL10_X: [f64; 5] = [
    1.488_743_389_816_312_16e-1,
    4.333_953_941_292_472_13e-1,
    6.794_095_682_990_244_36e-1,
    8.650_633_666_889_845_36e-1,
    9.739_065_285_171_717_43e-1,
];
const GL10_W: [f64; 5] = [
    2.955_242_247_147_529_81e-1,
    2.692_667_193_099_965_16e-1,
    2.190_863_625_159_820_14e-1,
    1.494_513_491_505_803_65e-1,
    6.667_134_430_868_806_86e-2,
];

/// Dot product with eight independent accumulators.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Fixed 10-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre10<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for i in 0..5 {
        let dx = h * GL10_X[i];
        acc += GL10_W[i] * (f(c - dx) + f(c + dx));
    }
    acc * h
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Pairwise summation in a fixed tree order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (l, r) = xs.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x: f64| x.powi(5) - 3.0 * x * x, -1.0, 2.0, Tolerance::default()).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn algebraic_endpoint_singularity() {
        let r = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, Tolerance::new(1e-12, 1e-12)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn complex_exponential() {
        let lam = Complex64::new(1.0, 3.0);
        let r = integrate(|t: f64| (-lam * t).exp(), 0.0, 40.0, Tolerance::default()).unwrap();
        let exact = (Complex64::new(1.0, 0.0) - (-lam * 40.0).exp()) / lam;
        assert!((r.value - exact).norm() < 1e-12);
    }

    #[test]
    fn nonfinite_integrand_is_reported() {
        let r = integrate(|x: f64| 1.0 / (x - 0.5), 0.0, 1.0, Tolerance::default());
        assert!(matches!(r, Err(QuadError::NonFinite(_))));
    }

    #[test]
    fn gauss_legendre_degree_19() {
        let v = gauss_legendre10(|x| x.powi(19) + x.powi(4), 0.0, 1.0);
        assert!((v - (1.0 / 20.0 + 1.0 / 5.0)).abs() < 1e-15);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        for _ in 0..10 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 10.0);
    }
}
