//! Discrete sine transform (type I) through a complex FFT of the odd
//! extension, for moving between sine coefficients and nodal values.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// `X_k = Σ_{j=1}^{M} x_j sin(πjk/(M+1))`, `k = 1..M`, for a fixed `M`.
pub struct Dst1 {
    m: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Dst1 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dst1").field("m", &self.m).finish()
    }
}

impl Dst1 {
    pub fn new(m: usize) -> Self {
        assert!(m > 0, "DST-I needs at least one point");
        let fft = FftPlanner::new().plan_fft_forward(2 * (m + 1));
        Self { m, fft }
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// In-place transform; `x.len()` must equal `len()`.
    pub fn apply(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.m);
        let n = 2 * (self.m + 1);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (j, &v) in x.iter().enumerate() {
            buf[j + 1] = Complex64::new(v, 0.0);
            buf[n - j - 1] = Complex64::new(-v, 0.0);
        }
        self.fft.process(&mut buf);
        // FFT of the odd extension is −2i·X_k.
        for (k, out) in x.iter_mut().enumerate() {
            *out = -0.5 * buf[k + 1].im;
        }
    }
}

/// Sine-series synthesis and analysis on the interior nodes `x_j = j/(M+1)`.
#[derive(Debug)]
pub struct SineGrid {
    dst: Dst1,
}

impl SineGrid {
    pub fn new(points: usize) -> Self {
        Self { dst: Dst1::new(points) }
    }

    pub fn points(&self) -> usize {
        self.dst.len()
    }

    pub fn nodes(&self) -> Vec<f64> {
        let m = self.points();
        (1..=m).map(|j| j as f64 / (m + 1) as f64).collect()
    }

    /// `u(x_j) = Σ_k c_k √2 sin(kπx_j)` for `coeffs.len() ≤ M`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let m = self.points();
        assert!(coeffs.len() <= m, "more modes than grid points");
        let mut buf = vec![0.0; m];
        buf[..coeffs.len()].copy_from_slice(coeffs);
        self.dst.apply(&mut buf);
        buf.iter_mut().for_each(|v| *v *= std::f64::consts::SQRT_2);
        buf
    }

    /// First `modes` sine coefficients of nodal values; exact for sine
    /// polynomials of degree ≤ M.
    pub fn analyze(&self, values: &[f64], modes: usize) -> Vec<f64> {
        let m = self.points();
        let mut buf = values.to_vec();
        self.dst.apply(&mut buf);
        let scale = std::f64::consts::SQRT_2 / (m + 1) as f64;
        buf.truncate(modes);
        buf.iter_mut().for_each(|v| *v *= scale);
        buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn matches_direct_sum() {
        let m = 13;
        let x: Vec<f64> = (0..m).map(|j| ((j * 7 + 3) % 11) as f64 - 4.5).collect();
        let mut y = x.clone();
        Dst1::new(m).apply(&mut y);
        for k in 1..=m {
            let direct: f64 = (1..=m)
                .map(|j| x[j - 1] * (PI * (j * k) as f64 / (m + 1) as f64).sin())
                .sum();
            assert!((y[k - 1] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip() {
        let g = SineGrid::new(31);
        let c = vec![1.0, -0.5, 0.25, 0.0, 3.0];
        let u = g.synthesize(&c);
        let back = g.analyze(&u, 5);
        for (a, b) in c.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
        let x = g.nodes()[4];
        let direct: f64 = c
            .iter()
            .enumerate()
            .map(|(k, ck)| ck * 2f64.sqrt() * ((k + 1) as f64 * PI * x).sin())
            .sum();
        assert!((u[4] - direct).abs() < 1e-13);
    }
}
