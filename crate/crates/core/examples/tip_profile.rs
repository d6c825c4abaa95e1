//! Tip-decaying radial profile of the first spherical mode and its measured vanishing
//! rate `ln|f| ≈ -C r^{-ε}`.

use hornlab::geometry::sphere_eigenvalue;
use hornlab::modes::{decay_exponent_fit, normalization_bound, profile_from_k2};
use hornlab::HornParams;

fn main() -> hornlab::Result<()> {
    let p = HornParams::standard();
    let (i, mu) = (1u32, 1.0);
    let profile = profile_from_k2(&p, i, mu, 0.02, 64)?;
    let r = profile.r_grid();
    println!("{:>12} {:>10} {:>14} {:>14}", "r", "s", "ln|f|", "f'/f");
    for k in (0..profile.len()).step_by(8) {
        println!(
            "{:>12.6e} {:>10.4} {:>14.6} {:>14.6}",
            r[k],
            profile.s_grid()[k],
            profile.log_mag()[k],
            profile.log_deriv()[k]
        );
    }
    let fit = decay_exponent_fit(&profile)?;
    let root = (4.0 * sphere_eigenvalue(p.n(), i)).sqrt() / p.eps();
    println!("fitted slope {:.4}, expected within [{:.4}, {:.4}]", fit.slope, -(root + 2.0), -(root - 1.0));
    let (computed, bound) = normalization_bound(&p, i, mu)?;
    println!("normalizing coefficient {computed:.6e}, bound {bound:.6e}");
    Ok(())
}
