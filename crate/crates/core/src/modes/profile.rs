//! Radial profiles `f_i(r) = k⁽²⁾(r^{-ε}) r^{-(c-1-ε)/2}` and the regular radial part `f_0`.

use std::sync::Arc;

use super::{solve_decaying, KBranch, KEquation};
use crate::error::{HornError, Result};
use crate::geometry::{sphere_eigenvalue, HornParams};
use crate::numerics::{bessel_j, fit_line, ln_gamma, quad_adaptive_with, LineFit, QuadOptions, SignedLog};

/// Tip profile of one spherical mode, sampled on an increasing grid in `s = r^{-ε}`.
///
/// Every sample is stored as a sign and `ln|f|`, so values far below the smallest
/// double are still represented. Profiles built by [`profile_from_k2`] keep the
/// decaying branch and can be evaluated between grid points.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    params: HornParams,
    mode_index: u32,
    mu: f64,
    s_grid: Vec<f64>,
    sign: Vec<f64>,
    log_mag: Vec<f64>,
    log_deriv: Vec<f64>,
    branch: Option<Arc<KBranch>>,
}

impl RadialProfile {
    /// Profile from tabulated samples; `log_deriv` is `d ln|f| / dr`.
    pub fn from_samples(
        params: HornParams,
        mode_index: u32,
        mu: f64,
        s_grid: Vec<f64>,
        sign: Vec<f64>,
        log_mag: Vec<f64>,
        log_deriv: Vec<f64>,
    ) -> Result<Self> {
        let n = s_grid.len();
        if sign.len() != n || log_mag.len() != n || log_deriv.len() != n {
            return Err(HornError::domain("profile columns must have equal length"));
        }
        if n == 0 {
            return Err(HornError::domain("profile grid is empty"));
        }
        if s_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(HornError::domain("profile s-grid must be strictly increasing"));
        }
        let threshold = super::r_mu(&params, mu)?;
        if s_grid[0] < threshold * (1.0 - 1e-12) {
            return Err(HornError::domain(format!(
                "profile grid starts at s = {} below r_mu = {threshold}",
                s_grid[0]
            )));
        }
        if log_mag.iter().chain(&log_deriv).any(|v| !v.is_finite()) {
            return Err(HornError::domain("profile samples must be finite"));
        }
        if sign.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(HornError::domain("profile signs must be +1 or -1"));
        }
        Ok(RadialProfile { params, mode_index, mu, s_grid, sign, log_mag, log_deriv, branch: None })
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

    pub fn s_grid(&self) -> &[f64] {
        &self.s_grid
    }

    pub fn sign(&self) -> &[f64] {
        &self.sign
    }

    pub fn log_mag(&self) -> &[f64] {
        &self.log_mag
    }

    pub fn log_deriv(&self) -> &[f64] {
        &self.log_deriv
    }

    pub fn len(&self) -> usize {
        self.s_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_grid.is_empty()
    }

    /// Radii of the grid points, `r = s^{-1/ε}` (decreasing).
    pub fn r_grid(&self) -> Vec<f64> {
        let e = self.params.eps();
        self.s_grid.iter().map(|s| s.powf(-1.0 / e)).collect()
    }

    /// `(r_min, r_top)` covered by the grid.
    pub fn r_range(&self) -> (f64, f64) {
        let e = self.params.eps();
        (self.s_grid[self.len() - 1].powf(-1.0 / e), self.s_grid[0].powf(-1.0 / e))
    }

    pub fn branch(&self) -> Option<&KBranch> {
        self.branch.as_deref()
    }

    /// `f(r)` as a signed log and `d ln|f| / dr`, from the underlying branch.
    pub fn eval(&self, r: f64) -> Result<(SignedLog, f64)> {
        let branch = self
            .branch
            .as_deref()
            .ok_or_else(|| HornError::domain("tabulated profiles cannot be evaluated off-grid"))?;
        if !(r > 0.0) {
            return Err(HornError::domain(format!("profile radius must be positive, got {r}")));
        }
        let e = self.params.eps();
        let a = self.params.k_power();
        let s = r.powf(-e);
        let (l, z) = branch.state(s)?;
        let ln_f = l + a * s.ln();
        let ds_dr = -e * s.powf(1.0 + 1.0 / e);
        Ok((SignedLog::new(1.0, ln_f), (z + a / s) * ds_dr))
    }

    /// Relative residual of `f'' + (c/r) f' - 4μ_i r^{-2-2ε} f + μ f = 0`, assembled from
    /// `ln f` derivatives with a centred difference of `d ln f / dr`.
    pub fn mode_ode_residual(&self, r: f64) -> Result<f64> {
        let h = 1e-4 * r;
        let (_, ld) = self.eval(r)?;
        let (_, ldp) = self.eval(r + h)?;
        let (_, ldm) = self.eval(r - h)?;
        let d2 = (ldp - ldm) / (2.0 * h);
        let c = self.params.c();
        let mu_i = sphere_eigenvalue(self.params.n(), self.mode_index);
        let v = 4.0 * mu_i * r.powf(-2.0 - 2.0 * self.params.eps());
        let res = d2 + ld * ld + c / r * ld - v + self.mu;
        Ok(res.abs() / (v + ld * ld + self.mu.abs()))
    }
}

/// Tip-decaying profile of mode `i ≥ 1` on `r ∈ [r_min, r_μ^{-1/ε}]`, normalized by `b = 1`.
///
/// The grid is uniform in `s = r^{-ε}` with `n_grid` points.
pub fn profile_from_k2(p: &HornParams, i: u32, mu: f64, r_min: f64, n_grid: usize) -> Result<RadialProfile> {
    if n_grid < 16 {
        return Err(HornError::domain(format!("n_grid = {n_grid} must be at least 16")));
    }
    let eq = KEquation::new(p, i, mu)?;
    let e = p.eps();
    let r_top = eq.r_mu().powf(-1.0 / e);
    if !(r_min > 0.0 && r_min < r_top) {
        return Err(HornError::domain(format!(
            "r_min = {r_min} must lie in (0, r_mu^(-1/eps)) = (0, {r_top})"
        )));
    }
    let s_hi = r_min.powf(-e);
    let branch = solve_decaying(eq, s_hi)?;
    let a = p.k_power();
    let s0 = eq.r_mu();
    let mut s_grid = Vec::with_capacity(n_grid);
    let mut log_mag = Vec::with_capacity(n_grid);
    let mut log_deriv = Vec::with_capacity(n_grid);
    for j in 0..n_grid {
        let s = if j + 1 == n_grid { s_hi } else { s0 + (s_hi - s0) * j as f64 / (n_grid - 1) as f64 };
        let (l, z) = branch.state(s)?;
        s_grid.push(s);
        log_mag.push(l + a * s.ln());
        log_deriv.push((z + a / s) * (-e * s.powf(1.0 + 1.0 / e)));
    }
    Ok(RadialProfile {
        params: *p,
        mode_index: i,
        mu,
        s_grid,
        sign: vec![1.0; n_grid],
        log_mag,
        log_deriv,
        branch: Some(Arc::new(branch)),
    })
}

/// Least-squares fit of `ln|f|` against `x = r^{-ε}`; the slope is the measured `-C` in
/// `f = O(e^{-C r^{-ε}})`.
pub fn decay_exponent_fit(profile: &RadialProfile) -> Result<LineFit> {
    if profile.len() < 8 {
        return Err(HornError::DegenerateFit(format!("profile has {} points, need 8", profile.len())));
    }
    fit_line(profile.s_grid(), profile.log_mag())
}

/// Order `(c-1)/2` of the Bessel function in the regular radial part.
pub fn bessel_order(p: &HornParams) -> f64 {
    0.5 * (p.c() - 1.0)
}

/// Regular radial part `f_0(r) = r^{(1-c)/2} J_{(c-1)/2}(r√μ)` with unit coefficient.
pub fn radial_mode_zero(p: &HornParams, mu: f64, r: f64) -> Result<f64> {
    check_mode_zero_args(mu, r)?;
    let nu = bessel_order(p);
    let x = r * mu.sqrt();
    if x < 1e-6 {
        let lead = (0.5 * nu * mu.ln() - nu * std::f64::consts::LN_2 - ln_gamma(nu + 1.0)).exp();
        return Ok(lead * (1.0 - x * x / (4.0 * (nu + 1.0))));
    }
    Ok(r.powf(-nu) * bessel_j(nu, x)?)
}

/// `f_0'(r) = -√μ r^{(1-c)/2} J_{(c+1)/2}(r√μ)`.
pub fn radial_mode_zero_derivative(p: &HornParams, mu: f64, r: f64) -> Result<f64> {
    check_mode_zero_args(mu, r)?;
    let nu = bessel_order(p);
    let x = r * mu.sqrt();
    if x < 1e-6 {
        let lead = ((0.5 * nu + 1.0) * mu.ln() - (nu + 1.0) * std::f64::consts::LN_2 - ln_gamma(nu + 2.0)).exp();
        return Ok(-lead * r);
    }
    Ok(-mu.sqrt() * r.powf(-nu) * bessel_j(nu + 1.0, x)?)
}

fn check_mode_zero_args(mu: f64, r: f64) -> Result<()> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(HornError::domain(format!("radial_mode_zero needs mu > 0, got {mu}")));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(HornError::domain(format!("radial_mode_zero needs r > 0, got {r}")));
    }
    Ok(())
}

/// `(computed, bound)` for the normalizing coefficient of the mode-`i` tip profile.
///
/// `computed = 1/‖f_i‖` with `‖f_i‖² = ∫_0^{r_μ^{-1/ε}} f_i² w dr`, and
/// `bound = e^{(κ+2) r_μ} r_μ^{(1+ε)/ε}` with the unspecified constant set to 1.
/// The integral is taken in `s`, where the integrand is `2^{1-n} ε^{-1} k⁽²⁾(s)² s^{-2/ε-2}`,
/// and the part beyond the branch span is bounded by the upper sandwich of `k⁽²⁾`.
pub fn normalization_bound(p: &HornParams, i: u32, mu: f64) -> Result<(f64, f64)> {
    let eq = KEquation::new(p, i, mu)?;
    let kappa = eq.kappa();
    if !(kappa > 1.0) {
        return Err(HornError::domain(format!("normalization tail bound needs kappa > 1, got {kappa}")));
    }
    let e = p.eps();
    let s_max = eq.default_s_max();
    let k2 = solve_decaying(eq, s_max)?;
    let r0 = eq.r_mu();
    let ln_c0 = (1.0 - p.n() as f64) * std::f64::consts::LN_2 - e.ln();
    let power = -2.0 / e - 2.0;
    let shift = 2.0 * k2.ln_value(r0)? + power * r0.ln();

    let mut nodes: Vec<f64> = k2.grid();
    nodes.dedup();
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-12, max_intervals: 200 };
    let mut body = 0.0;
    for w in nodes.windows(2) {
        let mut failure = None;
        let r = quad_adaptive_with(
            |s| match k2.ln_value(s) {
                Ok(l) => (2.0 * l + power * s.ln() - shift).exp(),
                Err(err) => {
                    failure.get_or_insert(err);
                    f64::NAN
                }
            },
            w[0],
            w[1],
            &opts,
        );
        if let Some(err) = failure {
            return Err(err);
        }
        body += r?.value;
    }
    // ∫_{s_max}^∞ ≤ (κ/2)² s_max^{power} e^{-2(κ-1)(s_max - r_μ)} / (2(κ-1)).
    let ln_tail = 2.0 * (0.5 * kappa).ln() + power * s_max.ln() - 2.0 * (kappa - 1.0) * (s_max - r0)
        - (2.0 * (kappa - 1.0)).ln()
        - shift;
    let total = body + 0.5 * ln_tail.exp();
    let ln_norm_sq = ln_c0 + shift + total.ln();
    let computed = (-0.5 * ln_norm_sq).exp();
    let bound = ((kappa + 2.0) * r0 + (1.0 + e) / e * r0.ln()).exp();
    Ok((computed, bound))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_profile() -> RadialProfile {
        profile_from_k2(&HornParams::standard(), 1, 1.0, 0.02, 64).unwrap()
    }

    #[test]
    fn tip_range_and_domain_error() {
        let p = HornParams::standard();
        let prof = std_profile();
        let (lo, hi) = prof.r_range();
        assert!((hi - 0.136_75).abs() < 1e-4, "{hi}");
        assert!((lo - 0.02).abs() < 1e-14);
        let err = profile_from_k2(&p, 1, 1.0, 0.2, 32).unwrap_err().to_string();
        assert!(err.contains("r_mu^(-1/eps)"), "{err}");
        assert!(profile_from_k2(&p, 1, 1.0, 0.05, 8).is_err());
        assert!(profile_from_k2(&p, 0, 1.0, 0.05, 32).is_err());
    }

    #[test]
    fn profile_vanishes_monotonically() {
        let prof = std_profile();
        let lm = prof.log_mag();
        assert!(lm.windows(2).skip(1).all(|w| w[1] < w[0]));
        assert!(lm.iter().all(|v| v.is_finite()));
        // Evaluation far below the double range stays finite.
        let deep = profile_from_k2(&HornParams::standard(), 1, 1.0, 1e-7, 32).unwrap();
        let last = *deep.log_mag().last().unwrap();
        assert!(last < -1000.0 && last.is_finite(), "{last}");
    }

    #[test]
    fn decay_slope_in_bracket() {
        let prof = std_profile();
        let fit = decay_exponent_fit(&prof).unwrap();
        let kappa = 2.0 * 2f64.sqrt() / 0.5;
        assert!(fit.slope > -(kappa + 2.0) && fit.slope < -(kappa - 1.0), "{}", fit.slope);
        let range = prof.log_mag()[0] - prof.log_mag()[prof.len() - 1];
        assert!(fit.max_residual <= 0.05 * range);
    }

    #[test]
    fn constant_profile_has_zero_slope() {
        let p = HornParams::standard();
        let s: Vec<f64> = (0..10).map(|j| 2.8 + 0.3 * j as f64).collect();
        let prof = RadialProfile::from_samples(p, 1, 1.0, s, vec![1.0; 10], vec![0.0; 10], vec![0.0; 10]).unwrap();
        assert!(decay_exponent_fit(&prof).unwrap().slope.abs() < 1e-15);
        assert!(prof.eval(0.1).is_err());
    }

    #[test]
    fn samples_agree_with_evaluation_and_ode() {
        let prof = std_profile();
        let rs = prof.r_grid();
        for (j, &r) in rs.iter().enumerate().step_by(9) {
            let (v, ld) = prof.eval(r).unwrap();
            assert!((v.ln_abs - prof.log_mag()[j]).abs() < 1e-12);
            assert!((ld - prof.log_deriv()[j]).abs() < 1e-9 * ld.abs());
        }
        for r in [0.021, 0.03, 0.05, 0.08, 0.12, 0.135] {
            let res = prof.mode_ode_residual(r).unwrap();
            assert!(res < 1e-5, "r={r}: {res}");
        }
    }

    #[test]
    fn log_derivative_matches_finite_difference_of_log() {
        let prof = std_profile();
        for r in [0.03, 0.07, 0.11] {
            let h = 1e-6;
            let lp = prof.eval(r + h).unwrap().0.ln_abs;
            let lm = prof.eval(r - h).unwrap().0.ln_abs;
            let ld = prof.eval(r).unwrap().1;
            assert!(((lp - lm) / (2.0 * h) - ld).abs() < 1e-5 * ld.abs());
        }
    }

    #[test]
    fn mode_zero_solves_bessel_form() {
        let p = HornParams::standard();
        let mu = 1.7;
        let c = p.c();
        for r in [0.1, 1.0, 5.0] {
            let h = 1e-4 * r;
            let f = radial_mode_zero(&p, mu, r).unwrap();
            let d = radial_mode_zero_derivative(&p, mu, r).unwrap();
            let dd = (radial_mode_zero_derivative(&p, mu, r + h).unwrap()
                - radial_mode_zero_derivative(&p, mu, r - h).unwrap())
                / (2.0 * h);
            let scale = dd.abs() + (c / r * d).abs() + (mu * f).abs();
            assert!((dd + c / r * d + mu * f).abs() < 1e-7 * scale, "r={r}");
            let fd = (radial_mode_zero(&p, mu, r + h).unwrap() - radial_mode_zero(&p, mu, r - h).unwrap()) / (2.0 * h);
            assert!((fd - d).abs() < 1e-7 * d.abs().max(1e-3));
        }
    }

    #[test]
    fn mode_zero_limit_and_scaling() {
        let p = HornParams::standard();
        let nu = bessel_order(&p);
        for mu in [0.3f64, 1.0, 4.0] {
            let limit = mu.powf(0.5 * nu) / (2f64.powf(nu) * crate::numerics::gamma(nu + 1.0));
            let near = radial_mode_zero(&p, mu, 1e-9).unwrap();
            let small = radial_mode_zero(&p, mu, 1e-4).unwrap();
            assert!((near / limit - 1.0).abs() < 1e-12);
            assert!((small / limit - 1.0).abs() < 1e-7 && limit > 0.0);
            for r in [0.2, 1.5, 3.0] {
                let x = r * mu.sqrt();
                let scaled = mu.sqrt().powf(nu) * x.powf(-nu) * bessel_j(nu, x).unwrap();
                assert!((radial_mode_zero(&p, mu, r).unwrap() - scaled).abs() < 1e-13);
            }
        }
        assert!(radial_mode_zero(&p, 0.0, 1.0).is_err());
        assert!(radial_mode_zero(&p, 1.0, 0.0).is_err());
    }

    #[test]
    fn normalization_outputs() {
        let p = HornParams::standard();
        let (c, b) = normalization_bound(&p, 1, 1.0).unwrap();
        assert!(c > 0.0 && c.is_finite() && b > 0.0 && b.is_finite());
        // r_μ is non-decreasing in μ, and so is the bound.
        let bounds: Vec<f64> =
            [0.5, 1.0, 2.0, 150.0, 400.0].iter().map(|&m| normalization_bound(&p, 1, m).unwrap().1).collect();
        assert!(bounds.windows(2).all(|w| w[1] >= w[0]));
        assert!(bounds[4] > bounds[0]);
        let ratios: Vec<f64> = [1.0, 4.0, 16.0]
            .iter()
            .map(|&m| {
                let (c, b) = normalization_bound(&p, 1, m).unwrap();
                (c / b).ln()
            })
            .collect();
        assert!(ratios.iter().all(|r| *r < 0.0), "{ratios:?}");
        let spread = ratios.iter().cloned().fold(f64::MIN, f64::max) - ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1.0, "{ratios:?}");
    }

    #[test]
    fn normalization_matches_r_space_quadrature() {
        // Direct r-space integral of f² w on the tip region as an independent route.
        let p = HornParams::standard();
        let (computed, _) = normalization_bound(&p, 1, 1.0).unwrap();
        let prof = profile_from_k2(&p, 1, 1.0, 0.004, 32).unwrap();
        let (lo, hi) = prof.r_range();
        let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-11, max_intervals: 2000 };
        let norm_sq = quad_adaptive_with(
            |r| {
                let (f, _) = prof.eval(r).unwrap();
                (2.0 * f.ln_abs + crate::geometry::log_measure_weight(&p, r).unwrap()).exp()
            },
            lo,
            hi,
            &opts,
        )
        .unwrap()
        .value;
        assert!((norm_sq.powf(-0.5) / computed - 1.0).abs() < 1e-8);
    }
}
