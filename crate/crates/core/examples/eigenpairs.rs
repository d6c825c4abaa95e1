//! Dirichlet eigenpairs of the first spherical mode on the horn truncated at `r = 4`.

use hornlab::spectral::{dirichlet_eigenvalues, weyl_check};
use hornlab::HornParams;

fn main() -> hornlab::Result<()> {
    let p = HornParams::standard();
    let pairs = dirichlet_eigenvalues(&p, 1, 4.0, 12)?;
    println!("{:>3} {:>16} {:>6} {:>12} {:>12}", "j", "nu", "zeros", "norm_defect", "dirichlet");
    for (k, pair) in pairs.iter().enumerate() {
        println!(
            "{:>3} {:>16.10} {:>6} {:>12.3e} {:>12.3e}",
            k + 1,
            pair.nu(),
            pair.zeros(),
            pair.norm_defect(),
            pair.dirichlet_defect()
        );
    }
    let fit = weyl_check(&pairs, &p)?;
    println!("Weyl fit: C1 = {:.4}, C2 = {:.4}, exponent = {:.4}", fit.c1, fit.c2, fit.exponent);
    Ok(())
}
