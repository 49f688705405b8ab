//! Smoothing exponents of the resolvent family: ‖A^s S(t)‖, ‖A^s Ṡ(t)‖ and
//! ‖A^{−1} Ṡ(t)‖ fitted in t for the Riesz kernel on 256 modes.

use std::sync::Arc;

use stochastic_volterra::grid::TimeGrid;
use stochastic_volterra::kernel::KernelSpec;
use stochastic_volterra::spectral::{build_resolvent_bank, measure_smoothing, SmoothingQuantity, SpectralBasis};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rho = 1.5;
    let grid = Arc::new(TimeGrid::uniform(1.0, 4096)?);
    let bank = build_resolvent_bank(&KernelSpec::riesz(rho), Arc::new(SpectralBasis::new(256)), grid)?;
    let cases = [
        (SmoothingQuantity::S, 0.5 / rho),
        (SmoothingQuantity::S, 1.0 / rho),
        (SmoothingQuantity::Sdot, 0.5 / rho),
        (SmoothingQuantity::Sdot, 1.0 / rho),
        (SmoothingQuantity::InverseSdot, 1.0),
    ];
    for (q, s) in cases {
        let r = measure_smoothing(&bank, q, s, rho, None, 40)?;
        println!("{q:?} s = {s:.3}: slope {:+.4}, target {:+.4}", r.slope, r.target);
    }
    Ok(())
}
