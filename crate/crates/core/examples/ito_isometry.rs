//! Monte Carlo second moment of the stochastic convolution at T against the
//! exact value of the discrete Itô sum, for trace-class and white noise.

use std::sync::Arc;

use stochastic_volterra::grid::TimeGrid;
use stochastic_volterra::kernel::KernelSpec;
use stochastic_volterra::noise::{ito_second_moment, sample_increments, stochastic_convolution_at, CovarianceSpec, ItoRule};
use stochastic_volterra::spectral::{build_resolvent_bank, SpectralBasis};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let modes = 32;
    let basis = Arc::new(SpectralBasis::new(modes));
    let grid = Arc::new(TimeGrid::uniform(1.0, 256)?);
    let bank = build_resolvent_bank(&KernelSpec::riesz(1.5), Arc::clone(&basis), Arc::clone(&grid))?;
    let g = vec![1.0; modes];
    let n_paths = 10_000;
    for cov in [CovarianceSpec::PowerDiagonal { gamma: 1.0 }, CovarianceSpec::White] {
        let exact = ito_second_moment(&bank, &cov, &g, ItoRule::LeftPoint, 256)?;
        let mut sq = Vec::with_capacity(n_paths);
        for p in 0..n_paths as u64 {
            let noise = sample_increments(&cov, &basis, Arc::clone(&grid), 11, p, modes)?;
            let w = stochastic_convolution_at(&bank, &noise, &g, ItoRule::LeftPoint, 256)?;
            sq.push(w.iter().map(|x| x * x).sum::<f64>());
        }
        let n = n_paths as f64;
        let mean = sq.iter().sum::<f64>() / n;
        let sd = (sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        println!("{cov:?}: MC {mean:.5} exact {exact:.5} ({:+.2} sigma)", (mean - exact) / sd);
    }
    Ok(())
}
