//! The adaptive integrator with dense output and the Gauss–Kronrod quadrature on
//! problems with known answers.

use hornlab::numerics::{integrate_ode, quad_adaptive, quad_semi_infinite, OdeOptions, QuadOptions};

fn main() -> hornlab::Result<()> {
    // y'' = -y, y(0) = 0, y'(0) = 1.
    let sol = integrate_ode(
        |_, y, dy| {
            dy[0] = y[1];
            dy[1] = -y[0];
        },
        0.0,
        &[0.0, 1.0],
        10.0,
        &OdeOptions::with_tol(1e-11, 1e-12),
    )?;
    println!("oscillator: {} steps", sol.steps());
    for t in [1.0, 2.5, 7.3, 10.0] {
        let y = sol.eval(t)?;
        println!("  t = {t:>4}: y = {:+.12}, error {:.1e}", y[0], (y[0] - t.sin()).abs());
    }

    let q = quad_adaptive(|x| x.ln() * x.sqrt(), 0.0, 1.0, 1e-12)?;
    println!("∫_0^1 √x ln x dx = {:.15} (exact -4/9), {} evaluations", q.value, q.evaluations);
    let g = quad_semi_infinite(|x| (-x * x).exp(), 0.0, 1.0, &QuadOptions::with_tol(0.0, 1e-12))?;
    println!("∫_0^∞ e^(-x²) dx = {:.15} (exact {:.15})", g.value, std::f64::consts::PI.sqrt() / 2.0);
    Ok(())
}
