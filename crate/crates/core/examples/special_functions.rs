//! Bessel and Gamma functions: Wronskians, a half-integer closed form and the
//! incomplete Gamma function.

use hornlab::numerics::{bessel_j, bessel_jy, gamma, ln_upper_gamma};

fn main() -> hornlab::Result<()> {
    println!("{:>6} {:>8} {:>18} {:>12}", "nu", "x", "J_nu(x)", "wronskian");
    for nu in [0.0, 0.5, 1.375, 2.375, 7.0] {
        for x in [0.1, 1.0, 10.0, 60.0] {
            let b = bessel_jy(nu, x)?;
            // J Y' - J' Y = 2/(πx)
            let w = (b.j * b.yp - b.jp * b.y) * std::f64::consts::PI * x / 2.0 - 1.0;
            println!("{nu:>6} {x:>8} {:>18.12e} {w:>12.2e}", b.j);
        }
    }

    let x = 3.7f64;
    let closed = (2.0 / (std::f64::consts::PI * x)).sqrt() * x.sin();
    println!("J_1/2(3.7) = {:.15e}, closed form {:.15e}", bessel_j(0.5, x)?, closed);
    println!("Γ(4.5) = {:.15}", gamma(4.5));
    println!("ln Γ(3, 2) = {:.15}, closed form {:.15}", ln_upper_gamma(3.0, 2.0)?, (10.0f64 * (-2.0f64).exp()).ln());
    Ok(())
}
