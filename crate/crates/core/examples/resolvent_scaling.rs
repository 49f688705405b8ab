//! μ-scaling of the L¹ norms of s, ṡ, tṡ, ts̈ and t²s̈ for the Riesz and
//! finite-history kernels.

use stochastic_volterra::grid::TimeGrid;
use stochastic_volterra::kernel::KernelSpec;
use stochastic_volterra::resolvent::verify_scalar_estimates;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cases = [
        (KernelSpec::riesz(1.5), vec![1.0, 10.0, 100.0, 1000.0], TimeGrid::graded(15.0, 4096, 2.0)?),
        (KernelSpec::FiniteHistory { rho: 1.5 }, vec![3e3, 3e4, 3e5, 3e6], TimeGrid::graded(0.05, 4096, 2.0)?),
    ];
    for (kernel, mus, grid) in &cases {
        let report = verify_scalar_estimates(kernel, mus, grid)?;
        println!("{} (sup |s| = {:.6})", report.kernel, report.max_abs_s);
        for c in &report.slopes {
            println!("  {:<8} slope {:+.4}  target {:+.4}", c.name, c.slope, c.target);
        }
    }
    Ok(())
}
