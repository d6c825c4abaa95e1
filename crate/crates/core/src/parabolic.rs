//! Parabolic frequency on time slices `t = -R²`, weighted by the backward kernel
//! `ln G = -((c+1)/2) ln(-t) + r²/(4t)` centred at the tip at time 0.
//!
//! For a caloric `u = v(r, t) φ(θ)`:
//! `D(R) = M ∫ v² G w dr`, `I(R) = R² M ∫ (v_r² + 4μ_i r^{-2-2ε} v²) G w dr` and
//! `N = I/D`, where `M = ∫ φ²` over the round sphere.

use rayon::prelude::*;

use crate::elliptic::{interior_derivative, ModeState};
use crate::error::{HornError, Result};
use crate::frequency::{lower_bound_abscissa, FrequencyRow, FrequencyScan, ScanKind};
use crate::geometry::{ln_weight_unchecked, sphere_area, sphere_eigenvalue, HornParams};
use crate::numerics::{fit_line, quad_adaptive_with, quad_semi_infinite, LineFit, QuadOptions, SignedLog};
use crate::spectral::CaloricSeries;

/// The weight `G` with exponent `(c+1)/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BackwardKernel {
    params: HornParams,
    exponent: f64,
}

impl BackwardKernel {
    pub fn new(params: &HornParams) -> Self {
        BackwardKernel { params: *params, exponent: 0.5 * (params.c() + 1.0) }
    }

    pub fn params(&self) -> &HornParams {
        &self.params
    }

    /// `(c+1)/2 = (N + (n-1)ε - (N-n)η)/2`.
    pub fn exponent(&self) -> f64 {
        self.exponent
    }
}

/// `ln G(r, t) = -exponent · ln(-t) + r²/(4t)` for `t < 0`.
pub fn kernel_log(g: &BackwardKernel, r: f64, t: f64) -> Result<f64> {
    if !(t < 0.0) || !t.is_finite() {
        return Err(HornError::domain(format!("the backward kernel needs t < 0, got {t}")));
    }
    if !(r >= 0.0) || !r.is_finite() {
        return Err(HornError::domain(format!("kernel radius must be non-negative, got {r}")));
    }
    Ok(-g.exponent * (-t).ln() + r * r / (4.0 * t))
}

/// A caloric function `u = v(r, t) φ(θ)` with a fixed spherical factor.
pub trait CaloricField: Sync {
    fn params(&self) -> &HornParams;

    /// Spherical index of `φ`.
    fn mode_index(&self) -> u32;

    /// `∫_{S^{n-1}} φ² dS`.
    fn sphere_mass(&self) -> f64;

    /// `(r_floor, r_cap)`: `v` is represented on `[r_floor, r_cap]`, vanishes at a finite
    /// cap, and the density below `r_floor` is increasing in `r`.
    fn radial_extent(&self) -> Result<(f64, f64)>;

    /// `(v, ∂_r v)` at `(r, t)`.
    fn radial_point(&self, r: f64, t: f64) -> Result<(SignedLog, SignedLog)>;
}

/// `u ≡ 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitField {
    pub params: HornParams,
}

impl CaloricField for UnitField {
    fn params(&self) -> &HornParams {
        &self.params
    }

    fn mode_index(&self) -> u32 {
        0
    }

    fn sphere_mass(&self) -> f64 {
        sphere_area(self.params.n())
    }

    fn radial_extent(&self) -> Result<(f64, f64)> {
        Ok((0.0, f64::INFINITY))
    }

    fn radial_point(&self, _r: f64, _t: f64) -> Result<(SignedLog, SignedLog)> {
        Ok((SignedLog::new(1.0, 0.0), SignedLog::ZERO))
    }
}

/// `u = e^{-μt} f(r) φ(θ)` for whole-horn states (constant or Bessel radial parts).
impl CaloricField for ModeState {
    fn params(&self) -> &HornParams {
        ModeState::params(self)
    }

    fn mode_index(&self) -> u32 {
        ModeState::mode_index(self)
    }

    fn sphere_mass(&self) -> f64 {
        1.0
    }

    fn radial_extent(&self) -> Result<(f64, f64)> {
        if self.profile().is_some() {
            return Err(HornError::domain(
                "tip-profile states do not cover the horn; use an eigenpair series for parabolic slices",
            ));
        }
        Ok((0.0, f64::INFINITY))
    }

    fn radial_point(&self, r: f64, t: f64) -> Result<(SignedLog, SignedLog)> {
        let (f, fp) = self.eval(r)?;
        let ln_decay = -self.mu() * t;
        Ok((f.scale_ln(ln_decay), fp.scale_ln(ln_decay)))
    }
}

impl CaloricField for CaloricSeries {
    fn params(&self) -> &HornParams {
        CaloricSeries::params(self)
    }

    fn mode_index(&self) -> u32 {
        CaloricSeries::mode_index(self)
    }

    fn sphere_mass(&self) -> f64 {
        1.0
    }

    fn radial_extent(&self) -> Result<(f64, f64)> {
        Ok((self.r_floor(), self.r_out()))
    }

    fn radial_point(&self, r: f64, t: f64) -> Result<(SignedLog, SignedLog)> {
        self.derivatives_at(0, r, t)
    }
}

/// `I`, `D` and `N = I/D` on the slice `t = -R²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Slice {
    pub r: f64,
    pub i: f64,
    pub d: f64,
    pub n: f64,
}

/// Log-densities `(ln of the D density, ln of the I density without R²)`.
fn slice_densities(u: &dyn CaloricField, kernel: &BackwardKernel, r: f64, t: f64) -> Result<(SignedLog, SignedLog)> {
    let p = u.params();
    let (v, vr) = u.radial_point(r, t)?;
    let ln_gw = kernel_log(kernel, r, t)? + ln_weight_unchecked(p, r);
    let mu_i = sphere_eigenvalue(p.n(), u.mode_index());
    let v2 = v * v;
    let grad = if mu_i == 0.0 {
        vr * vr
    } else {
        SignedLog::sum([vr * vr, v2.scale_ln((4.0 * mu_i).ln() + (-2.0 - 2.0 * p.eps()) * r.ln())])
    };
    Ok((v2.scale_ln(ln_gw), grad.scale_ln(ln_gw)))
}

/// Break points for the radial quadrature at scale `R`.
fn slice_knots(lower: f64, upper: f64, scale: f64) -> Vec<f64> {
    let mut knots = vec![lower];
    let mut x = scale / 16.0;
    while x < 64.0 * scale && x < upper {
        if x > lower {
            knots.push(x);
        }
        x *= 2.0;
    }
    if upper.is_finite() {
        knots.push(upper);
    }
    knots
}

/// Slice values at `R`, integrating with relative tolerance `rel_tol`.
pub fn parabolic_slice(u: &dyn CaloricField, big_r: f64, rel_tol: f64) -> Result<Slice> {
    if !(big_r > 0.0) || !big_r.is_finite() {
        return Err(HornError::domain(format!("R must be positive, got {big_r}")));
    }
    let kernel = BackwardKernel::new(u.params());
    let t = -big_r * big_r;
    let (lower, upper) = u.radial_extent()?;
    let knots = slice_knots(lower, upper, big_r);

    let mut shift_d = f64::NEG_INFINITY;
    let mut shift_i = f64::NEG_INFINITY;
    for w in knots.windows(2) {
        for k in 0..=8 {
            let r = w[0] + (w[1] - w[0]) * (0.02 + 0.96 * k as f64 / 8.0);
            let (d, i) = slice_densities(u, &kernel, r, t)?;
            shift_d = shift_d.max(d.ln_abs);
            shift_i = shift_i.max(i.ln_abs);
        }
    }
    let shift_d = if shift_d.is_finite() { shift_d } else { 0.0 };
    let shift_i = if shift_i.is_finite() { shift_i } else { 0.0 };

    let opts = QuadOptions { abs_tol: 0.0, rel_tol, max_intervals: 4000 };
    let mut failure = None;
    let mut density = |r: f64, which: usize| match slice_densities(u, &kernel, r, t) {
        Ok((d, i)) => {
            if which == 0 {
                d.scale_ln(-shift_d).to_f64()
            } else {
                i.scale_ln(-shift_i).to_f64()
            }
        }
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    let mut totals = [0.0f64; 2];
    for (which, total) in totals.iter_mut().enumerate() {
        for w in knots.windows(2) {
            *total += quad_adaptive_with(|r| density(r, which), w[0], w[1], &opts)?.value;
        }
        if upper == f64::INFINITY {
            let start = knots[knots.len() - 1];
            *total += quad_semi_infinite(|r| density(r, which), start, 2.0 * big_r, &opts)?.value;
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    if lower > 0.0 {
        // Both densities increase in r below the represented range.
        let (d, i) = slice_densities(u, &kernel, lower, t)?;
        totals[0] += 0.5 * lower * d.scale_ln(-shift_d).to_f64();
        totals[1] += 0.5 * lower * i.scale_ln(-shift_i).to_f64();
    }
    let mass = u.sphere_mass();
    let d = mass * totals[0] * shift_d.exp();
    let i = mass * big_r * big_r * totals[1] * shift_i.exp();
    if !(d > 0.0) || !d.is_finite() {
        return Err(HornError::domain(format!("D({big_r}) = {d} is zero or not representable")));
    }
    Ok(Slice { r: big_r, i, d, n: i / d })
}

/// Default relative tolerance of the slice quadratures.
pub const SLICE_TOLERANCE: f64 = 1e-12;

/// `(I, D, N)` at `R`.
pub fn parabolic_idn(u: &dyn CaloricField, big_r: f64) -> Result<Slice> {
    parabolic_slice(u, big_r, SLICE_TOLERANCE)
}

/// Rows `(R, I, D, N)`; slices are computed concurrently.
pub fn parabolic_scan(u: &dyn CaloricField, r_grid: &[f64]) -> Result<FrequencyScan> {
    parabolic_scan_with(u, r_grid, SLICE_TOLERANCE)
}

pub fn parabolic_scan_with(u: &dyn CaloricField, r_grid: &[f64], rel_tol: f64) -> Result<FrequencyScan> {
    if r_grid.is_empty() {
        return Err(HornError::domain("scan grid is empty"));
    }
    let slices: Vec<Slice> =
        r_grid.par_iter().map(|&r| parabolic_slice(u, r, rel_tol)).collect::<Result<_>>()?;
    let rows = slices.into_iter().map(|s| FrequencyRow { scale: s.r, i: s.i, energy: s.d, ratio: s.n }).collect();
    FrequencyScan::new(ScanKind::Parabolic, rows)
}

/// Defect of `I(R) = (R/4) D'(R)` with `D'` from a central difference of step `h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdDefect {
    pub absolute: f64,
    /// `absolute / (I + D)`: the defect of `N = (R/4) D'/D` relative to `1 + N`.
    pub relative: f64,
}

pub fn check_id_relation(u: &dyn CaloricField, big_r: f64, h: f64) -> Result<IdDefect> {
    if !(h > 0.0) || !(big_r - h > 0.0) {
        return Err(HornError::domain(format!("need 0 < h < R, got h = {h}, R = {big_r}")));
    }
    let slices: Vec<Slice> =
        [big_r, big_r + h, big_r - h].par_iter().map(|&r| parabolic_idn(u, r)).collect::<Result<_>>()?;
    let rhs = 0.25 * big_r * (slices[1].d - slices[2].d) / (2.0 * h);
    let absolute = (slices[0].i - rhs).abs();
    Ok(IdDefect { absolute, relative: absolute / (slices[0].i + slices[0].d) })
}

/// `(defect, C)` for `(log N)' ≥ -2ε/R` and `N ≤ C R^{-2ε}`.
///
/// The defect is the largest shortfall of `Δ ln N + 2ε Δ ln R` between consecutive rows;
/// it is zero when the inequality holds row to row. `N ≡ 0` passes with `C = 0`.
pub fn check_n_bound(u: &dyn CaloricField, scan: &FrequencyScan) -> Result<(f64, f64)> {
    if scan.kind() != ScanKind::Parabolic || scan.len() < 3 {
        return Err(HornError::domain("the N bound needs a parabolic scan with at least 3 rows"));
    }
    let rows = scan.rows();
    if rows.iter().all(|r| r.ratio == 0.0) {
        return Ok((0.0, 0.0));
    }
    if let Some(r) = rows.iter().find(|r| !(r.ratio > 0.0)) {
        return Err(HornError::Nodal { quantity: "N", at: r.scale });
    }
    let e2 = 2.0 * u.params().eps();
    let mut defect = 0.0f64;
    for w in rows.windows(2) {
        let change = (w[1].ratio / w[0].ratio).ln() + e2 * (w[1].scale / w[0].scale).ln();
        defect = defect.max(-change);
    }
    let c = rows.iter().map(|r| r.ratio * r.scale.powf(e2)).fold(0.0, f64::max);
    Ok((defect, c))
}

/// Fit of `log D` against `1 - (R/R_top)^{-2ε}`, with `R_top` the last scan scale.
pub fn check_d_lower(u: &dyn CaloricField, scan: &FrequencyScan) -> Result<LineFit> {
    if scan.kind() != ScanKind::Parabolic || scan.len() < 8 {
        return Err(HornError::DegenerateFit("the D lower bound needs a parabolic scan with 8 rows".into()));
    }
    let scales = scan.scales();
    let x = lower_bound_abscissa(&scales, scales[scales.len() - 1], u.params().eps());
    let y: Vec<f64> = scan.rows().iter().map(|r| r.energy.ln()).collect();
    fit_line(&x, &y)
}

/// `d ln N / d ln R` at interior scan rows.
pub fn log_n_slopes(scan: &FrequencyScan) -> Vec<f64> {
    let x: Vec<f64> = scan.rows().iter().map(|r| r.scale.ln()).collect();
    let y: Vec<f64> = scan.rows().iter().map(|r| r.ratio.ln()).collect();
    if x.len() < 3 {
        return Vec::new();
    }
    interior_derivative(&x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frequency::{make_grid, Spacing};
    use crate::numerics::gamma;
    use crate::spectral::dirichlet_eigenvalues;

    /// `ω_{n-1} 2^{c+1-n} Γ((c+1)/2)`.
    fn unit_mass(p: &HornParams) -> f64 {
        sphere_area(p.n()) * 2f64.powf(p.c() + 1.0 - p.n() as f64) * gamma(0.5 * (p.c() + 1.0))
    }

    #[test]
    fn kernel_values() {
        let k = BackwardKernel::new(&HornParams::standard());
        assert_eq!(k.exponent(), 2.375);
        assert_eq!(kernel_log(&k, 0.0, -1.0).unwrap(), 0.0);
        assert!((kernel_log(&k, 2.0, -1.0).unwrap() + 1.0).abs() < 1e-15);
        for lam in [0.5f64, 3.0] {
            let (r, t) = (0.7, -0.2);
            let scaled = kernel_log(&k, r / lam, t / (lam * lam)).unwrap() - 2.0 * k.exponent() * lam.ln();
            assert!((kernel_log(&k, r, t).unwrap() - scaled).abs() < 1e-13);
        }
        assert!(kernel_log(&k, 1.0, 0.0).is_err());
    }

    #[test]
    fn unit_field_mass_is_scale_free() {
        let p = HornParams::standard();
        let u = UnitField { params: p };
        let exact = unit_mass(&p);
        assert!((exact - 51.662_401_504_959_03).abs() < 1e-10);
        for big_r in [0.05, 0.1, 0.3, 0.5] {
            let s = parabolic_idn(&u, big_r).unwrap();
            assert!((s.d / exact - 1.0).abs() < 1e-10, "R = {big_r}: {}", s.d);
            assert_eq!(s.i, 0.0);
            assert_eq!(s.n, 0.0);
        }
        assert!(check_id_relation(&u, 0.1, 1e-4).unwrap().relative < 1e-8);
        let scan = parabolic_scan(&u, &make_grid(0.05, 0.5, 8, Spacing::Log).unwrap()).unwrap();
        assert_eq!(check_n_bound(&u, &scan).unwrap(), (0.0, 0.0));
        assert!(check_d_lower(&u, &scan).unwrap().slope.abs() < 1e-8);
    }

    #[test]
    fn id_relation_on_a_bessel_state() {
        let p = HornParams::standard();
        let u = ModeState::bessel(&p, 2.0).unwrap();
        let d1 = check_id_relation(&u, 0.5, 1e-3 * 0.5).unwrap();
        let d2 = check_id_relation(&u, 0.5, 0.5e-3 * 0.5).unwrap();
        assert!(d1.relative < 1e-4, "{d1:?}");
        assert!((d1.absolute / d2.absolute).log2() > 1.9, "{d1:?} {d2:?}");
    }

    #[test]
    fn id_relation_on_a_two_mode_series() {
        let p = HornParams::standard();
        let pairs = dirichlet_eigenvalues(&p, 1, 4.0, 2).unwrap();
        let u = CaloricSeries::new(pairs, vec![1.0, 0.5], 0.1).unwrap();
        let big_r = 0.1;
        let d1 = check_id_relation(&u, big_r, 1e-3 * big_r).unwrap();
        let d2 = check_id_relation(&u, big_r, 0.5e-3 * big_r).unwrap();
        assert!(d1.relative < 1e-4, "{d1:?}");
        assert!((d1.absolute / d2.absolute).log2() > 1.9, "{d1:?} {d2:?}");
    }

    #[test]
    fn tip_profile_states_are_rejected() {
        let p = HornParams::standard();
        let s = ModeState::tip(&p, 1, 1.0, 0.02, 0.13).unwrap();
        assert!(parabolic_idn(&s, 0.1).is_err());
    }
}
