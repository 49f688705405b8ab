//! Temporal Hölder exponent of the stochastic convolution driven by
//! space-time white noise (ρ = 1.5, s = 0), predicted 1/8.

use std::sync::Arc;

use stochastic_volterra::grid::TimeGrid;
use stochastic_volterra::kernel::KernelSpec;
use stochastic_volterra::noise::{CovarianceSpec, ItoRule, MarginalSampler};
use stochastic_volterra::regularity::{holder_fit, kappa, predicted_exponent, HolderDesign, Observations};
use stochastic_volterra::spectral::{BankOptions, ResolventBank, SpectralBasis};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (rho, modes, steps) = (1.5, 128, 4096);
    let basis = Arc::new(SpectralBasis::new(modes));
    let grid = Arc::new(TimeGrid::uniform(1.0, steps)?);
    let opts = BankOptions { derivatives: false, strict: false };
    let bank = ResolventBank::build(&KernelSpec::riesz(rho), Arc::clone(&basis), Arc::clone(&grid), opts)?;
    let design = HolderDesign::dyadic(&grid)?;
    let sampler = MarginalSampler::new(&bank, &CovarianceSpec::White, &vec![1.0; modes], &design.nodes(), ItoRule::LeftPoint)?;
    let obs = Observations::from_sampler(basis, &grid, &sampler, 2024, 2000);
    let fit = holder_fit(&obs, &design, 0.0, 2.0)?;
    let predicted = predicted_exponent(kappa(-1.0 / 6.0, 0.0, rho));
    println!("slope {:.4} ± {:.4}, predicted {predicted}", fit.slope, fit.half_width);
    for (h, d) in fit.lags.iter().zip(&fit.d) {
        println!("  h = {h:.3e}  D = {d:.5e}");
    }
    Ok(())
}
