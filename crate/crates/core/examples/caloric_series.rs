//! A caloric function built from Dirichlet eigenpairs of the first spherical mode,
//! vanishing to infinite order at the tip for every positive time.

use hornlab::spectral::{caloric_decay_check, dirichlet_eigenvalues, evaluate_caloric, CaloricSeries};
use hornlab::frequency::{make_grid, Spacing};
use hornlab::HornParams;

fn main() -> hornlab::Result<()> {
    let p = HornParams::standard();
    let pairs = dirichlet_eigenvalues(&p, 1, 4.0, 8)?;
    let series = CaloricSeries::new(pairs, vec![1.0, -0.5, 0.25, 0.125, 0.1, -0.05, 0.02, 0.01], 0.25)?;
    println!(
        "tail certificate at t >= 0.25: {:.3e} (coefficient bound {}, growth constant {:.4})",
        series.tail_certificate(),
        series.coefficient_bound(),
        series.growth_constant()
    );
    let four = series.truncated(4)?;
    println!("four-term certificate at t = 0.25: {:.3e}", four.certificate_at(0.25)?);

    let grid = make_grid(0.005, 0.1, 32, Spacing::Log)?;
    for t in [0.25, 0.5, 1.0] {
        let fit = caloric_decay_check(&series, &grid, t)?;
        let near_tip = evaluate_caloric(&series, 0.005, t)?;
        println!(
            "t = {t}: ln|u(0.005)| = {:.3}, decay slope {:.5}, max residual {:.2e}",
            near_tip.ln_abs, fit.slope, fit.max_residual
        );
    }
    Ok(())
}
