//! Numerical laboratory for stochastic Volterra equations of the form
//! `du + ∫₀ᵗ b(t−s) A u(s) ds dt = F(u) dt + G(u) dW` on the unit interval.

pub mod config;
pub mod fit;
pub mod grid;
pub mod harness;
pub mod kernel;
pub mod mild;
pub mod mittag_leffler;
pub mod noise;
pub mod quad;
pub mod regularity;
pub mod report;
pub mod resolvent;
pub mod rng;
pub mod special;
pub mod spectral;
pub mod transform;
