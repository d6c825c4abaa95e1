//! Elliptic frequency `I(r)`, `E(r)`, `U(r) = E/I` of separated solutions `u = f(r) φ(θ)`.
//!
//! All three reduce to radial quantities because the spherical factor has unit `L²` norm:
//! `I = r^{1-n} w f²` and `E = r^{2-n} ∫_0^r (f'² + 4μ_i s^{-2-2ε} f² - μ f²) w ds`.
//! The energy integral is accumulated in log space against a common shift, and every
//! evaluation of `E` also forms the boundary expression `r^{2-n} w f f'` and insists
//! that the two agree.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{HornError, Result};
use crate::frequency::{lower_bound_abscissa, FrequencyRow, FrequencyScan, ScanKind};
use crate::geometry::{ln_weight_unchecked, sphere_eigenvalue, HornParams};
use crate::modes::{bessel_order, profile_from_k2, r_mu, radial_mode_zero, radial_mode_zero_derivative, KEquation, RadialProfile};
use crate::numerics::{bessel_j, fit_line, quad_adaptive_with, LineFit, QuadOptions, SignedLog};

/// Relative agreement demanded between the bulk and boundary forms of `E`.
pub const ENERGY_FORM_TOLERANCE: f64 = 1e-6;

/// How many e-folds of `k⁽²⁾` the profile extends below the bottom of the domain.
const TIP_EXTENSION_EFOLDS: f64 = 40.0;

const PROFILE_POINTS: usize = 64;

#[derive(Clone, Debug)]
enum Radial {
    /// `f ≡ 1` with `μ = 0`.
    Constant,
    /// `f = f_0`, the regular radial part with `μ > 0`.
    Bessel,
    Tip(Arc<RadialProfile>),
}

/// A separated solution `u = f_i(r) φ_i(θ)` of `Δu = -μu` with `∫ φ_i² = 1`.
///
/// The frequency formulas use `λ = -μ`.
#[derive(Clone, Debug)]
pub struct ModeState {
    params: HornParams,
    mode_index: u32,
    mu: f64,
    radial: Radial,
    domain: (f64, f64),
}

impl ModeState {
    /// `f ≡ 1` on the whole horn.
    pub fn constant(params: &HornParams) -> Self {
        ModeState { params: *params, mode_index: 0, mu: 0.0, radial: Radial::Constant, domain: (0.0, f64::INFINITY) }
    }

    /// The regular radial part `f_0` of eigenvalue `μ > 0` on the whole horn.
    pub fn bessel(params: &HornParams, mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(HornError::domain(format!("the Bessel state needs mu > 0, got {mu}")));
        }
        Ok(ModeState { params: *params, mode_index: 0, mu, radial: Radial::Bessel, domain: (0.0, f64::INFINITY) })
    }

    /// Tip-decaying mode `i ≥ 1` on `[r_lo, r_hi]`, where `r_hi ≤ r_μ^{-1/ε}`.
    ///
    /// The profile is built deeper than `r_lo` so that the part of the energy integral
    /// below the profile is smaller than `e^{-80}` relative to the value at `r_lo`.
    pub fn tip(params: &HornParams, i: u32, mu: f64, r_lo: f64, r_hi: f64) -> Result<Self> {
        let eq = KEquation::new(params, i, mu)?;
        let e = params.eps();
        let r_top = eq.r_mu().powf(-1.0 / e);
        if !(r_lo > 0.0 && r_lo < r_hi && r_hi <= r_top) {
            return Err(HornError::domain(format!(
                "tip domain [{r_lo}, {r_hi}] must satisfy 0 < r_lo < r_hi <= r_mu^(-1/eps) = {r_top}"
            )));
        }
        let s_deep = r_lo.powf(-e) + TIP_EXTENSION_EFOLDS / eq.kappa().max(0.5);
        let profile = profile_from_k2(params, i, mu, s_deep.powf(-1.0 / e), PROFILE_POINTS)?;
        Self::from_profile(profile, r_lo, r_hi)
    }

    /// State backed by an existing profile, which must cover `[r_lo, r_hi]` and keep its branch.
    pub fn from_profile(profile: RadialProfile, r_lo: f64, r_hi: f64) -> Result<Self> {
        if profile.branch().is_none() {
            return Err(HornError::domain("mode states need a profile that keeps its branch"));
        }
        let (lo, hi) = profile.r_range();
        if !(lo < r_lo && r_lo < r_hi && r_hi <= hi * (1.0 + 1e-12)) {
            return Err(HornError::domain(format!(
                "domain [{r_lo}, {r_hi}] must lie inside the profile range ({lo}, {hi}]"
            )));
        }
        Ok(ModeState {
            params: *profile.params(),
            mode_index: profile.mode_index(),
            mu: profile.mu(),
            radial: Radial::Tip(Arc::new(profile)),
            domain: (r_lo, r_hi),
        })
    }

    pub fn params(&self) -> &HornParams {
        &self.params
    }

    pub fn mode_index(&self) -> u32 {
        self.mode_index
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `λ = -μ`.
    pub fn lambda(&self) -> f64 {
        -self.mu
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn profile(&self) -> Option<&RadialProfile> {
        match &self.radial {
            Radial::Tip(p) => Some(p),
            _ => None,
        }
    }

    /// Smallest radius at which the radial part is represented (0 for closed forms).
    pub fn lower_limit(&self) -> f64 {
        match &self.radial {
            Radial::Tip(p) => p.r_range().0,
            _ => 0.0,
        }
    }

    /// `(f(r), f'(r))` in signed-log form.
    pub fn eval(&self, r: f64) -> Result<(SignedLog, SignedLog)> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(HornError::domain(format!("radius must be positive and finite, got {r}")));
        }
        match &self.radial {
            Radial::Constant => Ok((SignedLog::new(1.0, 0.0), SignedLog::ZERO)),
            Radial::Bessel => Ok((
                SignedLog::from_f64(radial_mode_zero(&self.params, self.mu, r)?),
                SignedLog::from_f64(radial_mode_zero_derivative(&self.params, self.mu, r)?),
            )),
            Radial::Tip(p) => {
                let (lo, hi) = p.r_range();
                if r < lo * (1.0 - 1e-12) || r > hi * (1.0 + 1e-12) {
                    return Err(HornError::domain(format!("r = {r} outside the profile range [{lo}, {hi}]")));
                }
                let (f, ld) = p.eval(r)?;
                Ok((f, f * SignedLog::from_f64(ld)))
            }
        }
    }

    fn check_domain(&self, r: f64) -> Result<()> {
        let (lo, hi) = self.domain;
        if !(r >= lo * (1.0 - 1e-12) && r <= hi * (1.0 + 1e-12)) || !(r > 0.0) {
            return Err(HornError::domain(format!("r = {r} outside the state domain [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// True where the sphere `{r} × S^{n-1}` is nodal, so `I(r) = 0`.
    fn is_nodal(&self, r: f64, f: SignedLog) -> Result<bool> {
        if f.is_zero() {
            return Ok(true);
        }
        match self.radial {
            Radial::Bessel => {
                let nu = bessel_order(&self.params);
                Ok(bessel_j(nu, r * self.mu.sqrt())?.abs() < 1e-13)
            }
            _ => Ok(false),
        }
    }

    /// `ln |(f'² + (4μ_i r^{-2-2ε} - μ) f²) w|` with its sign.
    fn energy_density(&self, r: f64) -> Result<SignedLog> {
        let (f, fp) = self.eval(r)?;
        let lw = ln_weight_unchecked(&self.params, r);
        let mu_i = sphere_eigenvalue(self.params.n(), self.mode_index);
        let v = 4.0 * mu_i * r.powf(-2.0 - 2.0 * self.params.eps()) - self.mu;
        Ok(SignedLog::sum([(fp * fp).scale_ln(lw), (f * f * SignedLog::from_f64(v)).scale_ln(lw)]))
    }

    /// Certified bound on `∫_0^{lower_limit}` of the energy density, scaled by `e^{-shift}`.
    ///
    /// Below the profile the density `f² w (ld² + V - μ)` is increasing in `r`, because
    /// `r ld` grows like `r^{-ε}` while the bracket only falls like `r^{-2-2ε}`; the
    /// bound is then the rectangle `r_floor · density(r_floor)`.
    fn tip_remainder(&self, shift: f64) -> Result<f64> {
        let Radial::Tip(p) = &self.radial else { return Ok(0.0) };
        let r0 = p.r_range().0;
        let (_, ld) = p.eval(r0)?;
        let needed = 2.0 * (2.0 + 2.0 * self.params.eps());
        if !(2.0 * ld * r0 + self.params.c() > needed) {
            return Err(HornError::Consistency(format!(
                "energy density is not monotone below r = {r0}; extend the profile"
            )));
        }
        let d = self.energy_density(r0)?;
        Ok(r0 * d.scale_ln(-shift).to_f64().abs())
    }
}

/// `I(r) = r^{1-n} w(r) f(r)²` as a signed log.
pub fn elliptic_log_i(state: &ModeState, r: f64) -> Result<SignedLog> {
    state.check_domain(r)?;
    let (f, _) = state.eval(r)?;
    let n = state.params.n() as f64;
    Ok((f * f).scale_ln((1.0 - n) * r.ln() + ln_weight_unchecked(&state.params, r)))
}

pub fn elliptic_i(state: &ModeState, r: f64) -> Result<f64> {
    Ok(elliptic_log_i(state, r)?.to_f64())
}

/// The two forms of `E(r)`, without the common factor `r^{2-n} e^{shift}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyForms {
    /// `∫_0^r` of the energy density.
    pub bulk: f64,
    /// `w f f'` at `r`.
    pub boundary: f64,
    /// `∫_0^r` of the absolute energy density.
    pub absolute: f64,
    /// Natural log of the common factor.
    pub ln_factor: f64,
}

impl EnergyForms {
    pub fn bulk_value(&self) -> f64 {
        self.bulk * self.ln_factor.exp()
    }

    pub fn boundary_value(&self) -> f64 {
        self.boundary * self.ln_factor.exp()
    }

    /// Disagreement relative to the larger of the forms and the absolute integral.
    pub fn relative_mismatch(&self) -> f64 {
        let scale = self.bulk.abs().max(self.boundary.abs()).max(self.absolute);
        if scale == 0.0 {
            0.0
        } else {
            (self.bulk - self.boundary).abs() / scale
        }
    }
}

fn piece_integrals(state: &ModeState, a: f64, b: f64, shift: f64) -> Result<(f64, f64)> {
    let mut failure = None;
    let mut density = |s: f64, absolute: bool| match state.energy_density(s) {
        Ok(d) => {
            let v = d.scale_ln(-shift).to_f64();
            if absolute {
                v.abs()
            } else {
                v
            }
        }
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-12, max_intervals: 2000 };
    let abs = quad_adaptive_with(|s| density(s, true), a, b, &opts)?.value;
    let opts = QuadOptions { abs_tol: 1e-13 * abs, ..opts };
    let signed = quad_adaptive_with(|s| density(s, false), a, b, &opts)?.value;
    match failure {
        Some(e) => Err(e),
        None => Ok((signed, abs)),
    }
}

/// Energy forms at every radius of an increasing grid, accumulated piecewise.
fn energy_forms_on(state: &ModeState, radii: &[f64]) -> Result<Vec<EnergyForms>> {
    let n = state.params.n() as f64;
    let mut shift = f64::NEG_INFINITY;
    for &r in radii {
        shift = shift.max(state.energy_density(r)?.ln_abs);
    }
    if !shift.is_finite() {
        shift = 0.0;
    }
    let floor = state.lower_limit();
    let mut knots = Vec::with_capacity(radii.len() + 1);
    knots.push(floor);
    knots.extend_from_slice(radii);
    let pieces: Vec<Result<(f64, f64)>> =
        knots.par_windows(2).map(|w| piece_integrals(state, w[0], w[1], shift)).collect();
    let remainder = state.tip_remainder(shift)?;
    let (mut bulk, mut absolute) = (0.5 * remainder, remainder);
    let mut out = Vec::with_capacity(radii.len());
    for (piece, &r) in pieces.into_iter().zip(radii) {
        let (v, a) = piece?;
        bulk += v;
        absolute += a;
        let (f, fp) = state.eval(r)?;
        let lw = ln_weight_unchecked(&state.params, r);
        let boundary = (f * fp).scale_ln(lw - shift).to_f64();
        out.push(EnergyForms { bulk, boundary, absolute, ln_factor: (2.0 - n) * r.ln() + shift });
    }
    Ok(out)
}

fn checked(forms: EnergyForms, r: f64) -> Result<EnergyForms> {
    let mismatch = forms.relative_mismatch();
    if mismatch > ENERGY_FORM_TOLERANCE || !mismatch.is_finite() {
        return Err(HornError::Consistency(format!(
            "bulk and boundary forms of E differ by {mismatch:e} (relative) at r = {r}"
        )));
    }
    Ok(forms)
}

/// Both forms of `E(r)` without the agreement check.
pub fn elliptic_energy_forms(state: &ModeState, r: f64) -> Result<EnergyForms> {
    state.check_domain(r)?;
    Ok(energy_forms_on(state, &[r])?[0])
}

/// `E(r)` in bulk form, after checking it against the boundary form.
pub fn elliptic_e(state: &ModeState, r: f64) -> Result<f64> {
    Ok(checked(elliptic_energy_forms(state, r)?, r)?.bulk_value())
}

/// Rows `(r, I, E, U)` over an increasing grid inside the domain.
pub fn elliptic_scan(state: &ModeState, r_grid: &[f64]) -> Result<FrequencyScan> {
    if r_grid.is_empty() {
        return Err(HornError::domain("scan grid is empty"));
    }
    if r_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(HornError::domain("scan grid must be strictly increasing"));
    }
    for &r in r_grid {
        state.check_domain(r)?;
        let (f, _) = state.eval(r)?;
        if state.is_nodal(r, f)? {
            return Err(HornError::Nodal { quantity: "I", at: r });
        }
    }
    let forms = energy_forms_on(state, r_grid)?;
    let mut rows = Vec::with_capacity(r_grid.len());
    for (&r, form) in r_grid.iter().zip(forms) {
        let form = checked(form, r)?;
        let i = elliptic_i(state, r)?;
        if !(i > 0.0) || !i.is_finite() {
            return Err(HornError::domain(format!("I({r}) = {i} is not representable")));
        }
        let e = form.bulk_value();
        rows.push(FrequencyRow { scale: r, i, energy: e, ratio: e / i });
    }
    FrequencyScan::new(ScanKind::Elliptic, rows)
}

fn require_rows(scan: &FrequencyScan, kind: ScanKind, min: usize) -> Result<()> {
    if scan.kind() != kind {
        return Err(HornError::domain(format!("expected a {kind:?} scan")));
    }
    if scan.len() < min {
        return Err(HornError::DegenerateFit(format!("scan has {} rows, need {min}", scan.len())));
    }
    Ok(())
}

/// Derivative of `y` with respect to `x` at interior nodes by the three-point formula,
/// which is second order on non-uniform grids.
pub(crate) fn interior_derivative(x: &[f64], y: &[f64]) -> Vec<f64> {
    (1..x.len() - 1)
        .map(|k| {
            let (h1, h2) = (x[k] - x[k - 1], x[k + 1] - x[k]);
            -h2 / (h1 * (h1 + h2)) * y[k - 1] + (h2 - h1) / (h1 * h2) * y[k] + h1 / (h2 * (h1 + h2)) * y[k + 1]
        })
        .collect()
}

/// Largest defect of `r (log I)' - 2U = c - n + 1` over interior rows, each divided by
/// `1 + |2U|` so that it is scale-free.
pub fn check_log_i_identity(state: &ModeState, scan: &FrequencyScan) -> Result<f64> {
    require_rows(scan, ScanKind::Elliptic, 3)?;
    let rows = scan.rows();
    let x: Vec<f64> = rows.iter().map(|r| r.scale.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.i.ln()).collect();
    let constant = state.params.log_i_constant();
    let slopes = interior_derivative(&x, &y);
    Ok(slopes
        .iter()
        .zip(&rows[1..rows.len() - 1])
        .map(|(d, row)| (d - 2.0 * row.ratio - constant).abs() / (1.0 + 2.0 * row.ratio.abs()))
        .fold(0.0, f64::max))
}

/// `(defect, C)` for `(r^{2ε} U)' ≥ λ r^{1+2ε}` and `U ≤ C r^{-2ε}`.
///
/// Between consecutive rows the inequality is used in integrated form, so the defect is
/// the largest shortfall divided by the largest `|r^{2ε} U|`; it is zero when the
/// inequality holds row to row.
pub fn check_u_growth(state: &ModeState, scan: &FrequencyScan) -> Result<(f64, f64)> {
    require_rows(scan, ScanKind::Elliptic, 3)?;
    let e2 = 2.0 * state.params.eps();
    let lambda = state.lambda();
    let scaled: Vec<f64> = scan.rows().iter().map(|r| r.scale.powf(e2) * r.ratio).collect();
    let size = scaled.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut shortfall = 0.0f64;
    for (w, s) in scan.rows().windows(2).zip(scaled.windows(2)) {
        let gain = lambda * (w[1].scale.powf(2.0 + e2) - w[0].scale.powf(2.0 + e2)) / (2.0 + e2);
        shortfall = shortfall.max(gain - (s[1] - s[0]));
    }
    let defect = if size > 0.0 { shortfall.max(0.0) / size } else { shortfall.max(0.0) };
    let c = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    Ok((defect, c))
}

/// Fit of `log I` against `1 - (r/r_top)^{-2ε}`, with `r_top` the last scan radius.
pub fn check_i_lower(state: &ModeState, scan: &FrequencyScan) -> Result<LineFit> {
    require_rows(scan, ScanKind::Elliptic, 8)?;
    let scales = scan.scales();
    let x = lower_bound_abscissa(&scales, scales[scales.len() - 1], state.params.eps());
    let y: Vec<f64> = scan.rows().iter().map(|r| r.i.ln()).collect();
    fit_line(&x, &y)
}

/// Upper end of the tip region of mode `i` at eigenvalue `μ`.
pub fn tip_radius(params: &HornParams, mu: f64) -> Result<f64> {
    Ok(r_mu(params, mu)?.powf(-1.0 / params.eps()))
}
