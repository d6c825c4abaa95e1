//! Dirichlet eigenpairs of the radial operator on the truncated horn `(0, r_out]` and
//! the caloric series assembled from them.
//!
//! For spherical index `i` the radial eigenproblem is
//! `g'' + (c/r) g' - 4μ_i r^{-2-2ε} g + ν g = 0`, tip-decaying (regular when `i = 0`),
//! with `g(r_out) = 0`. Near the tip the solution is taken from the decaying branch of
//! the transformed equation at parameter `ν`; from the end of that region outwards it
//! is integrated in Prüfer form `g = ρ sin θ`, `g' = σ ρ cos θ`, whose angle is
//! monotone in `ν` and counts zeros. Eigenvalues solve `θ(r_out; ν) = jπ`.

mod series;

pub use series::{
    analyticity_probe, caloric_decay_check, caloric_table, evaluate_caloric, tail_bound, time_derivative,
    AnalyticityReport, CaloricSeries,
};

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{HornError, Result};
use crate::geometry::{ln_weight_unchecked, sphere_eigenvalue, HornParams};
use crate::modes::{
    decaying_log_derivative, radial_mode_zero, radial_mode_zero_derivative, solve_decaying, KBranch, KEquation,
    RadialProfile,
};
use crate::numerics::{
    find_root_bracketed, fit_line, integrate_ode, quad_adaptive_with, DenseSolution, OdeOptions, QuadOptions,
    SignedLog,
};
use crate::output::{Cell, CsvTable};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenOptions {
    /// Eigenfunctions are represented down to this radius (or deeper).
    pub r_floor: f64,
    /// Ratio between consecutive trial eigenvalues in the bracketing sweep.
    pub sweep_factor: f64,
    pub max_sweep: usize,
    /// Relative width to which each eigenvalue bracket is refined.
    pub root_rtol: f64,
    pub ode_rtol: f64,
    pub ode_atol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { r_floor: 1e-3, sweep_factor: 1.25, max_sweep: 400, root_rtol: 1e-10, ode_rtol: 1e-11, ode_atol: 1e-12 }
    }
}

/// Fraction of `r_out` at which regular (`i = 0`) solutions switch to Prüfer form.
const REGULAR_START: f64 = 1e-3;

#[derive(Clone, Copy, Debug)]
struct Shooter {
    params: HornParams,
    mode_index: u32,
    mu_i: f64,
    r_out: f64,
    opts: EigenOptions,
}

#[derive(Clone, Copy, Debug)]
struct Start {
    r: f64,
    /// `d ln g / dr` of the tip solution at `r`.
    log_derivative: f64,
}

fn sigma_of(nu: f64) -> f64 {
    nu.max(1.0).sqrt()
}

impl Shooter {
    fn start(&self, nu: f64) -> Result<Start> {
        if self.mode_index == 0 {
            let r = REGULAR_START * self.r_out;
            let ld = radial_mode_zero_derivative(&self.params, nu, r)? / radial_mode_zero(&self.params, nu, r)?;
            return Ok(Start { r, log_derivative: ld });
        }
        let eq = KEquation::new(&self.params, self.mode_index, nu)?;
        let e = self.params.eps();
        let r = eq.r_mu().powf(-1.0 / e).min(0.5 * self.r_out);
        let s = r.powf(-e);
        let z = decaying_log_derivative(&eq, s)?;
        let ld = (z + self.params.k_power() / s) * (-e * s.powf(1.0 + 1.0 / e));
        Ok(Start { r, log_derivative: ld })
    }

    /// Prüfer system for `(θ, ln ρ)`.
    fn rhs(&self, nu: f64) -> impl FnMut(f64, &[f64], &mut [f64]) {
        let sigma = sigma_of(nu);
        let c = self.params.c();
        let four_mu = 4.0 * self.mu_i;
        let power = -2.0 - 2.0 * self.params.eps();
        move |r, y, dy| {
            let (sn, cs) = y[0].sin_cos();
            let v = if four_mu == 0.0 { 0.0 } else { four_mu * r.powf(power) };
            dy[0] = sigma * cs * cs + c / r * sn * cs + (nu - v) / sigma * sn * sn;
            dy[1] = (sigma + (v - nu) / sigma) * sn * cs - c / r * cs * cs;
        }
    }

    fn shoot(&self, nu: f64) -> Result<(Start, DenseSolution)> {
        let start = self.start(nu)?;
        let theta0 = sigma_of(nu).atan2(start.log_derivative);
        let opts = OdeOptions::with_tol(self.opts.ode_rtol, self.opts.ode_atol);
        let sol = integrate_ode(self.rhs(nu), start.r, &[theta0, 0.0], self.r_out, &opts)?;
        Ok((start, sol))
    }

    fn theta_end(&self, nu: f64) -> Result<f64> {
        Ok(self.shoot(nu)?.1.y_end()[0])
    }
}

#[derive(Clone, Debug)]
enum TipPart {
    Decaying(Arc<KBranch>),
    Regular,
}

/// Normalized eigenfunction on `(0, r_out]`: a tip solution up to `r_start`, Prüfer form
/// beyond it.
#[derive(Clone, Debug)]
pub struct Eigenfunction {
    params: HornParams,
    mode_index: u32,
    nu: f64,
    r_out: f64,
    r_start: f64,
    r_floor: f64,
    sigma: f64,
    tip: TipPart,
    outer: DenseSolution,
    /// Added to `ln|g|` everywhere: matching at `r_start` plus normalization.
    tip_offset: f64,
    ln_norm: f64,
}

impl Eigenfunction {
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn mode_index(&self) -> u32 {
        self.mode_index
    }

    pub fn params(&self) -> &HornParams {
        &self.params
    }

    pub fn r_out(&self) -> f64 {
        self.r_out
    }

    /// Radius where the tip solution hands over to the Prüfer integration.
    pub fn r_start(&self) -> f64 {
        self.r_start
    }

    /// Smallest radius at which `g` can be evaluated (0 for regular tips).
    pub fn r_floor(&self) -> f64 {
        self.r_floor
    }

    /// `(ln g, d ln g / dr)` of the unnormalized tip solution.
    fn tip_raw(&self, r: f64) -> Result<(f64, f64)> {
        match &self.tip {
            TipPart::Decaying(branch) => {
                let e = self.params.eps();
                let a = self.params.k_power();
                let s = r.powf(-e);
                let (l, z) = branch.state(s)?;
                Ok((l + a * s.ln(), (z + a / s) * (-e * s.powf(1.0 + 1.0 / e))))
            }
            TipPart::Regular => {
                let f = radial_mode_zero(&self.params, self.nu, r)?;
                let fp = radial_mode_zero_derivative(&self.params, self.nu, r)?;
                Ok((f.ln(), fp / f))
            }
        }
    }

    /// `(g(r), g'(r))` in signed-log form.
    pub fn eval(&self, r: f64) -> Result<(SignedLog, SignedLog)> {
        if !(r > 0.0) || r < self.r_floor * (1.0 - 1e-12) || r > self.r_out * (1.0 + 1e-12) {
            return Err(HornError::domain(format!(
                "eigenfunction evaluated at r = {r} outside [{}, {}]",
                self.r_floor, self.r_out
            )));
        }
        if r <= self.r_start {
            let (l, ld) = self.tip_raw(r)?;
            let g = SignedLog::new(1.0, l + self.tip_offset + self.ln_norm);
            return Ok((g, g * SignedLog::from_f64(ld)));
        }
        let y = self.outer.eval(r.min(self.r_out))?;
        let (sn, cs) = y[0].sin_cos();
        let lr = y[1] + self.ln_norm;
        Ok((
            SignedLog::from_f64(sn).scale_ln(lr),
            SignedLog::from_f64(cs).scale_ln(lr + self.sigma.ln()),
        ))
    }

    /// `g(r)` as a plain number.
    pub fn value(&self, r: f64) -> Result<f64> {
        Ok(self.eval(r)?.0.to_f64())
    }

    /// Relative residual of the radial equation, from a centred difference of `g'`.
    pub fn mode_ode_residual(&self, r: f64) -> Result<f64> {
        let h = 1e-4 * r.min(self.r_out - r).max(1e-3 * r);
        let (g, gp) = self.eval(r)?;
        let gpp = (self.eval(r + h)?.1.to_f64() - self.eval(r - h)?.1.to_f64()) / (2.0 * h);
        let (g, gp) = (g.to_f64(), gp.to_f64());
        let c = self.params.c();
        let v = 4.0 * sphere_eigenvalue(self.params.n(), self.mode_index) * r.powf(-2.0 - 2.0 * self.params.eps());
        let terms = [gpp, c / r * gp, -v * g, self.nu * g];
        let scale: f64 = terms.iter().map(|t| t.abs()).sum();
        Ok(terms.iter().sum::<f64>().abs() / scale)
    }

    /// `∫_{r_floor}^{r_out} g² w dr` by quadrature in `r` through [`Eigenfunction::eval`].
    pub fn norm_squared_in_r(&self) -> Result<f64> {
        let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-12, max_intervals: 4000 };
        let mut failure = None;
        let mut density = |r: f64| match self.eval(r) {
            Ok((g, _)) => (g * g).scale_ln(ln_weight_unchecked(&self.params, r)).to_f64(),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        };
        let inner = quad_adaptive_with(&mut density, self.r_floor, self.r_start, &opts)?.value;
        let outer = quad_adaptive_with(&mut density, self.r_start, self.r_out, &opts)?.value;
        match failure {
            Some(e) => Err(e),
            None => Ok(inner + outer),
        }
    }

    /// The tip part sampled as a [`RadialProfile`] with `n_grid` points uniform in `s`.
    pub fn tip_profile(&self, n_grid: usize) -> Result<RadialProfile> {
        if n_grid < 2 {
            return Err(HornError::domain("tip profile needs at least 2 points"));
        }
        if self.mode_index == 0 {
            return Err(HornError::domain("regular eigenfunctions have no tip-decaying profile"));
        }
        let e = self.params.eps();
        let (s0, s1) = (self.r_start.powf(-e), self.r_floor.powf(-e));
        let mut s_grid = Vec::with_capacity(n_grid);
        let mut log_mag = Vec::with_capacity(n_grid);
        let mut log_deriv = Vec::with_capacity(n_grid);
        for k in 0..n_grid {
            let s = if k + 1 == n_grid { s1 } else { s0 + (s1 - s0) * k as f64 / (n_grid - 1) as f64 };
            let r = if k == 0 { self.r_start } else { s.powf(-1.0 / e) };
            let (g, gp) = self.eval(r)?;
            s_grid.push(s);
            log_mag.push(g.ln_abs);
            log_deriv.push(gp.sign * (gp.ln_abs - g.ln_abs).exp());
        }
        RadialProfile::from_samples(
            self.params,
            self.mode_index,
            self.nu,
            s_grid,
            vec![1.0; n_grid],
            log_mag,
            log_deriv,
        )
    }
}

/// One Dirichlet eigenpair with its diagnostics.
#[derive(Clone, Debug)]
pub struct EigenPair {
    nu: f64,
    mode_index: u32,
    r_out: f64,
    g: Arc<Eigenfunction>,
    zeros: usize,
    norm_defect: f64,
    dirichlet_defect: f64,
    ln_max_abs: f64,
}

impl EigenPair {
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn mode_index(&self) -> u32 {
        self.mode_index
    }

    pub fn r_out(&self) -> f64 {
        self.r_out
    }

    pub fn g(&self) -> &Eigenfunction {
        &self.g
    }

    /// Sign changes of `g` in `(0, r_out)`.
    pub fn zeros(&self) -> usize {
        self.zeros
    }

    /// `|‖g‖² - 1|` from an independent quadrature in `r`.
    pub fn norm_defect(&self) -> f64 {
        self.norm_defect
    }

    /// `|g(r_out)| / max|g|`.
    pub fn dirichlet_defect(&self) -> f64 {
        self.dirichlet_defect
    }

    /// `ln max|g|` over `(0, r_out]`.
    pub fn ln_max_abs(&self) -> f64 {
        self.ln_max_abs
    }
}

/// The first `count` Dirichlet eigenpairs of mode `i` on `(0, r_out]`.
pub fn dirichlet_eigenvalues(p: &HornParams, i: u32, r_out: f64, count: usize) -> Result<Vec<EigenPair>> {
    dirichlet_eigenvalues_with(p, i, r_out, count, &EigenOptions::default())
}

pub fn dirichlet_eigenvalues_with(
    p: &HornParams,
    i: u32,
    r_out: f64,
    count: usize,
    opts: &EigenOptions,
) -> Result<Vec<EigenPair>> {
    if count == 0 {
        return Err(HornError::domain("count must be at least 1"));
    }
    if !(r_out > 0.0) || !r_out.is_finite() {
        return Err(HornError::domain(format!("r_out must be positive and finite, got {r_out}")));
    }
    if !(opts.sweep_factor > 1.0) || !(opts.root_rtol > 0.0) || !(opts.r_floor > 0.0) {
        return Err(HornError::domain("eigen options need sweep_factor > 1, root_rtol > 0, r_floor > 0"));
    }
    let mu_i = sphere_eigenvalue(p.n(), i);
    let shooter = Shooter { params: *p, mode_index: i, mu_i, r_out, opts: *opts };
    let zeros_below = |theta: f64| (theta / PI).floor() as usize;

    // Below min V (or far below the first Bessel zero) there is no eigenvalue.
    let mut nu = if i == 0 {
        (0.5 / r_out).powi(2)
    } else {
        0.5 * 4.0 * mu_i * r_out.powf(-2.0 - 2.0 * p.eps())
    };
    let mut theta = shooter.theta_end(nu)?;
    let mut halvings = 0;
    while zeros_below(theta) > 0 {
        halvings += 1;
        if halvings > 60 {
            return Err(HornError::Consistency("no eigenvalue-free starting point found".into()));
        }
        nu *= 0.5;
        theta = shooter.theta_end(nu)?;
    }
    let mut sweep = vec![(nu, theta)];
    while zeros_below(theta) < count {
        if sweep.len() > opts.max_sweep {
            return Err(HornError::BracketExhausted { found: zeros_below(theta), wanted: count, nu_max: nu });
        }
        nu *= opts.sweep_factor;
        theta = shooter.theta_end(nu)?;
        if theta < sweep[sweep.len() - 1].1 - 1e-8 {
            return Err(HornError::Consistency(format!("Prüfer angle decreased in nu near nu = {nu}")));
        }
        sweep.push((nu, theta));
    }

    let brackets: Vec<(usize, f64, f64)> = (1..=count)
        .map(|j| {
            let k = sweep.iter().position(|&(_, th)| zeros_below(th) >= j).expect("sweep reached count");
            (j, sweep[k - 1].0, sweep[k].0)
        })
        .collect();

    brackets
        .into_par_iter()
        .map(|(j, lo, hi)| {
            let target = j as f64 * PI;
            let nu = find_root_bracketed(|nu| Ok(shooter.theta_end(nu)? - target), lo, hi, opts.root_rtol * lo)?;
            build_pair(&shooter, nu)
        })
        .collect()
}

fn build_pair(shooter: &Shooter, nu: f64) -> Result<EigenPair> {
    let p = shooter.params;
    let e = p.eps();
    let (start, outer) = shooter.shoot(nu)?;
    let (tip, r_floor) = if shooter.mode_index == 0 {
        (TipPart::Regular, 0.0)
    } else {
        let r_floor = shooter.opts.r_floor.min(0.5 * start.r);
        let eq = KEquation::new(&p, shooter.mode_index, nu)?;
        (TipPart::Decaying(Arc::new(solve_decaying(eq, r_floor.powf(-e))?)), r_floor)
    };
    let mut g = Eigenfunction {
        params: p,
        mode_index: shooter.mode_index,
        nu,
        r_out: shooter.r_out,
        r_start: start.r,
        r_floor,
        sigma: sigma_of(nu),
        tip,
        outer,
        tip_offset: 0.0,
        ln_norm: 0.0,
    };
    let theta0 = sigma_of(nu).atan2(start.log_derivative);
    g.tip_offset = theta0.sin().ln() - g.tip_raw(start.r)?.0;
    g.ln_norm = -0.5 * ln_norm_squared(&g)?;

    let n_samples = 4000usize.max(400 * (1 + (nu.sqrt() * shooter.r_out / PI) as usize));
    let mut zeros = 0;
    let mut last_sign = 1.0;
    let mut ln_max = g.eval(start.r)?.0.ln_abs;
    for k in 1..=n_samples {
        let r = start.r + (shooter.r_out * (1.0 - 1e-6) - start.r) * k as f64 / n_samples as f64;
        let (v, _) = g.eval(r)?;
        ln_max = ln_max.max(v.ln_abs);
        if v.sign != 0.0 && v.sign != last_sign {
            zeros += 1;
            last_sign = v.sign;
        }
    }
    for r in g.outer.mesh() {
        ln_max = ln_max.max(g.eval(r)?.0.ln_abs);
    }
    let end = g.eval(shooter.r_out)?.0;
    let dirichlet_defect = if end.is_zero() { 0.0 } else { (end.ln_abs - ln_max).exp() };
    let norm_defect = (g.norm_squared_in_r()? - 1.0).abs();
    Ok(EigenPair {
        nu,
        mode_index: shooter.mode_index,
        r_out: shooter.r_out,
        g: Arc::new(g),
        zeros,
        norm_defect,
        dirichlet_defect,
        ln_max_abs: ln_max,
    })
}

/// `ln ∫_0^{r_out} g² w dr` for the current offsets; the tip part is integrated in `s`.
fn ln_norm_squared(g: &Eigenfunction) -> Result<f64> {
    let p = g.params;
    let e = p.eps();
    let (l_start, _) = g.tip_raw(g.r_start)?;
    let shift = 2.0 * (l_start + g.tip_offset) + ln_weight_unchecked(&p, g.r_start);
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-13, max_intervals: 4000 };
    let mut failure = None;

    let tip = match &g.tip {
        TipPart::Regular => {
            let mut density = |r: f64| match g.tip_raw(r) {
                Ok((l, _)) => (2.0 * (l + g.tip_offset) + ln_weight_unchecked(&p, r) - shift).exp(),
                Err(err) => {
                    failure.get_or_insert(err);
                    0.0
                }
            };
            quad_adaptive_with(&mut density, 0.0, g.r_start, &opts)?.value
        }
        TipPart::Decaying(branch) => {
            // In s the density is g² w(r(s)) |dr/ds| = exp(φ(s)).
            let phi = |s: f64| -> Result<(f64, f64)> {
                let r = s.powf(-1.0 / e);
                let (l, ld_s) = {
                    let (l, z) = branch.state(s)?;
                    let a = p.k_power();
                    (l + a * s.ln(), z + a / s)
                };
                let value = 2.0 * (l + g.tip_offset) + ln_weight_unchecked(&p, r) - e.ln() - (1.0 / e + 1.0) * s.ln();
                let slope = 2.0 * ld_s - p.c() / (e * s) - (1.0 / e + 1.0) / s;
                Ok((value - shift, slope))
            };
            let (s0, s1) = (g.r_start.powf(-e), g.r_floor.powf(-e));
            let mut knots: Vec<f64> = branch.grid().into_iter().filter(|&s| s > s0 && s < s1).collect();
            knots.insert(0, s0);
            knots.push(s1);
            let mut body = 0.0;
            for w in knots.windows(2) {
                let mut density = |s: f64| match phi(s) {
                    Ok((v, _)) => v.exp(),
                    Err(err) => {
                        failure.get_or_insert(err);
                        0.0
                    }
                };
                body += quad_adaptive_with(&mut density, w[0], w[1], &opts)?.value;
            }
            let (v_end, slope_end) = phi(s1)?;
            if !(slope_end < 0.0) {
                return Err(HornError::Consistency(format!("tip density is not decaying at s = {s1}")));
            }
            // exp(φ) decays at least at rate |φ'(s1)| beyond s1, since φ' → -2κ from above.
            body + v_end.exp() / (-slope_end)
        }
    };

    let outer_shift_density = |r: f64| -> Result<f64> {
        let y = g.outer.eval(r)?;
        Ok((2.0 * (y[1] + y[0].sin().abs().ln()) + ln_weight_unchecked(&p, r) - shift).exp())
    };
    let mut density = |r: f64| match outer_shift_density(r) {
        Ok(v) => v,
        Err(err) => {
            failure.get_or_insert(err);
            0.0
        }
    };
    let outer = quad_adaptive_with(&mut density, g.r_start, g.r_out, &opts)?.value;
    if let Some(err) = failure {
        return Err(err);
    }
    Ok((tip + outer).ln() + shift)
}

/// Eigenvalue table with header `j,nu,zeros,norm_defect`.
pub fn eigen_table(pairs: &[EigenPair]) -> CsvTable {
    let mut t = CsvTable::new(&["j", "nu", "zeros", "norm_defect"]);
    for (k, pair) in pairs.iter().enumerate() {
        t.push(vec![Cell::from(k + 1), Cell::Real(pair.nu), Cell::from(pair.zeros), Cell::Real(pair.norm_defect)]);
    }
    t
}

/// Fitted Weyl sandwich `C1 j^{2/N} ≤ ν_j ≤ C2 j²` over a computed list.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct WeylFit {
    /// Largest `C1` with `C1 j^{2/N} ≤ ν_j` for every listed `j`.
    pub c1: f64,
    /// Smallest `C2` with `ν_j ≤ C2 j²` for every listed `j`.
    pub c2: f64,
    /// Least-squares slope of `ln ν_j` against `ln j`.
    pub exponent: f64,
}

pub fn weyl_check(eigs: &[EigenPair], p: &HornParams) -> Result<WeylFit> {
    if eigs.len() < 8 {
        return Err(HornError::DegenerateFit(format!("Weyl fit needs 8 eigenvalues, got {}", eigs.len())));
    }
    let gamma = 2.0 / p.big_n();
    let mut c1 = f64::INFINITY;
    let mut c2 = 0.0f64;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (k, pair) in eigs.iter().enumerate() {
        let j = (k + 1) as f64;
        c1 = c1.min(pair.nu / j.powf(gamma));
        c2 = c2.max(pair.nu / (j * j));
        x.push(j.ln());
        y.push(pair.nu.ln());
    }
    Ok(WeylFit { c1, c2, exponent: fit_line(&x, &y)?.slope })
}
