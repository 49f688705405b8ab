//! Certifies the Laplace-defined example kernel and sweeps the growth
//! exponent around its pass/fail boundary.

use stochastic_volterra::kernel::{certify, check_growth_conditions, CertifyOptions, GrowthOptions, KernelSpec, LaplaceKernel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kernel = KernelSpec::LaplaceDefined(LaplaceKernel::reference_example());
    let report = certify(&kernel, &CertifyOptions::default())?;
    println!("rho_sector = {:.4}", report.rho_sector);
    println!("rho_growth = {:.4}", report.rho_growth);
    for c in &report.conditions {
        println!("  {:<24} {:>12.5e}  {}", c.name, c.value, if c.pass { "ok" } else { "FAIL" });
    }

    let candidates: Vec<f64> = (0..=10).map(|i| 1.35 + 0.01 * i as f64).collect();
    let growth = check_growth_conditions(&kernel, &candidates, &GrowthOptions::default())?;
    for c in &growth.candidates {
        println!("rho = {:.2}: {}", c.rho, if c.pass { "bounded" } else { "grows" });
    }
    println!("boundary: {:?}", growth.boundary());
    Ok(())
}
