//! Parabolic frequency `N = I/D` with the backward kernel centered at the tip.
//!
//! For `u ≡ 1` the mass `D(R)` does not depend on `R`; for a caloric mode the relation
//! `I = (R/4) D'` is checked by central differences.

use hornlab::elliptic::ModeState;
use hornlab::frequency::{make_grid, Spacing};
use hornlab::parabolic::{check_id_relation, check_n_bound, parabolic_idn, parabolic_scan, UnitField};
use hornlab::HornParams;

fn main() -> hornlab::Result<()> {
    let p = HornParams::standard();
    let unit = UnitField { params: p };
    for r in [0.05, 0.1, 0.3, 0.5] {
        println!("u ≡ 1: D({r}) = {:.14}", parabolic_idn(&unit, r)?.d);
    }

    let state = ModeState::bessel(&p, 2.0)?;
    for h in [4e-3, 2e-3, 1e-3] {
        let d = check_id_relation(&state, 0.2, h * 0.2)?;
        println!("Bessel mode, h = {h:e} R: I - (R/4)D' = {:.3e} (relative {:.3e})", d.absolute, d.relative);
    }
    let scan = parabolic_scan(&state, &make_grid(0.05, 0.5, 10, Spacing::Log)?)?;
    for row in scan.rows() {
        println!("R = {:.4}  I = {:.6e}  D = {:.6e}  N = {:.6e}", row.scale, row.i, row.energy, row.ratio);
    }
    let (shortfall, c) = check_n_bound(&state, &scan)?;
    println!("(log N)' shortfall {shortfall:.2e}, N ≤ {c:.4} R^(-2ε)");
    Ok(())
}
