//! Scalar resolvent of the Riesz kernel against the Mittag-Leffler closed
//! form `s(t) = E_ρ(−μ t^ρ)`, with the observed order under grid doubling.

use stochastic_volterra::grid::TimeGrid;
use stochastic_volterra::kernel::KernelSpec;
use stochastic_volterra::mittag_leffler::mittag_leffler;
use stochastic_volterra::resolvent::solve_scalar;

fn max_error(rho: f64, mu: f64, steps: usize) -> Result<f64, Box<dyn std::error::Error>> {
    let grid = TimeGrid::uniform(2.0, steps)?;
    let table = solve_scalar(&KernelSpec::riesz(rho), mu, &grid)?;
    let mut err: f64 = 0.0;
    for (t, s) in table.t().iter().zip(&table.s) {
        err = err.max((s - mittag_leffler(rho, -mu * t.powf(rho))?).abs());
    }
    Ok(err)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for rho in [1.2, 1.5, 1.8] {
        for mu in [1.0, 10.0, 100.0] {
            let coarse = max_error(rho, mu, 2048)?;
            let fine = max_error(rho, mu, 4096)?;
            println!("rho {rho} mu {mu:>5}: error {fine:.3e}, order {:.2}", (coarse / fine).log2());
        }
    }
    Ok(())
}
