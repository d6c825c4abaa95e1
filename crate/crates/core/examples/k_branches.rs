//! Growing and decaying branches of the transformed radial equation, checked against
//! their exponential sandwiches and their constant Wronskian.

use hornlab::modes::{default_s_max, solve_k1, solve_k2};
use hornlab::HornParams;

fn main() -> hornlab::Result<()> {
    let p = HornParams::standard();
    for i in [1u32, 2] {
        for mu in [0.5, 1.0, 2.0] {
            let s_max = default_s_max(&p, i, mu)?;
            let k1 = solve_k1(&p, i, mu, s_max)?;
            let k2 = solve_k2(&p, i, mu, s_max)?;
            let eq = *k1.equation();
            let r0 = eq.r_mu();
            let mut worst = f64::NEG_INFINITY;
            let (mut w_lo, mut w_hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for k in 0..=60 {
                let s = r0 + 3.0 * k as f64 / 60.0;
                let (l1, u1) = eq.k1_log_bounds(s);
                let (l2, u2) = eq.k2_log_bounds(s);
                let (a, b) = (k1.ln_value(s)?, k2.ln_value(s)?);
                // Positive margins mean the bounds hold.
                worst = worst.max((l1 - a).max(a - u1)).max((l2 - b).max(b - u2));
                let w = k2.wronskian(s)?;
                w_lo = w_lo.min(w);
                w_hi = w_hi.max(w);
            }
            println!(
                "i = {i}, mu = {mu}: kappa = {:.4}, r_mu = {:.6}, worst log margin {worst:+.3e}, wronskian spread {:.1e}",
                eq.kappa(),
                r0,
                (w_hi - w_lo) / w_hi.abs()
            );
        }
    }
    Ok(())
}
