//! Radius of convergence in time of a two-pair caloric series, from its Taylor
//! coefficients at `(r0, t0)`.

use hornlab::spectral::{analyticity_probe, dirichlet_eigenvalues, CaloricSeries};
use hornlab::HornParams;

fn main() -> hornlab::Result<()> {
    let p = HornParams::standard();
    let pairs = dirichlet_eigenvalues(&p, 1, 4.0, 2)?;
    let series = CaloricSeries::new(pairs, vec![1.0, 0.5], 0.5)?;
    for kmax in [8, 16, 24, 32] {
        let report = analyticity_probe(&series, 1.0, 0.5, kmax)?;
        println!("kmax = {kmax:>2}: fitted radius {:.5}", report.fitted_radius);
    }
    let report = analyticity_probe(&series, 1.0, 0.5, 16)?;
    for (k, a) in report.coefficients.iter().enumerate().step_by(4) {
        println!("  ln|a_{k}| = {a:.6}");
    }
    Ok(())
}
