//! Elliptic frequency `U = E/I` of a tip-decaying mode: the `log I` identity, the growth
//! inequality and the lower bound on `I`.

use hornlab::elliptic::{check_i_lower, check_log_i_identity, check_u_growth, elliptic_scan, ModeState};
use hornlab::frequency::{make_grid, Spacing};
use hornlab::HornParams;

fn main() -> hornlab::Result<()> {
    let p = HornParams::standard();
    let state = ModeState::tip(&p, 1, 1.0, 0.02, 0.13)?;
    for points in [32, 64, 128] {
        let grid = make_grid(0.02, 0.13, points, Spacing::Log)?;
        let scan = elliptic_scan(&state, &grid)?;
        println!("{points:>4} points: log I identity defect {:.3e}", check_log_i_identity(&state, &scan)?);
    }
    let grid = make_grid(0.02, 0.13, 64, Spacing::Log)?;
    let scan = elliptic_scan(&state, &grid)?;
    for row in scan.rows().iter().step_by(9) {
        println!("r = {:.5}  I = {:.6e}  E = {:.6e}  U = {:.6}", row.scale, row.i, row.energy, row.ratio);
    }
    let (shortfall, c) = check_u_growth(&state, &scan)?;
    println!("U growth shortfall {shortfall:.2e}, U ≤ {c:.4} r^(-2ε)");
    let fit = check_i_lower(&state, &scan)?;
    println!("log I lower-bound fit: slope {:.4}, max residual {:.3e}", fit.slope, fit.max_residual);

    let constant = ModeState::constant(&p);
    let scan = elliptic_scan(&constant, &make_grid(0.05, 1.0, 12, Spacing::Log)?)?;
    println!("constant state: max |U| = {:e}", scan.rows().iter().map(|r| r.ratio.abs()).fold(0.0, f64::max));
    Ok(())
}
