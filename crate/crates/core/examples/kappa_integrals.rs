//! The two κ-integrals in closed form against quadrature, and their
//! small-h exponents.

use stochastic_volterra::regularity::{kappa_h_grid, kappa_integrals, kappa_integrals_quadrature, kappa_slopes};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for kappa in [-1.75, -1.0, -0.25] {
        let closed = kappa_integrals(kappa, 1.0, 0.1)?;
        let (q1, q2) = kappa_integrals_quadrature(kappa, 1.0, 0.1)?;
        let slopes = kappa_slopes(kappa, 1.0, &kappa_h_grid())?;
        println!(
            "kappa {kappa:+.2}: |dI1| {:.1e} |dI2| {:.1e}  slopes {:.4} {:.4} (target {:.4})",
            (closed.i1 - q1).abs(),
            (closed.i2 - q2).abs(),
            slopes.slope_i1,
            slopes.slope_i2,
            slopes.target
        );
    }
    Ok(())
}
