//! Radial modes near the tip.
//!
//! With `s = r^{-ε}` and `f(r) = k(s) s^a`, `a = (c-1-ε)/(2ε)`, the mode equation
//! becomes `k'' = q(s) k` with
//! `q(s) = A s^{-2} + κ² - (μ/ε²) s^{-2/ε-2}`, `A = a(a+1)`, `κ = √(4μ_i/ε²)`.
//! Past the threshold `r_μ` the bracket `A s^{-2} - (μ/ε²) s^{-2/ε-2}` lies in `[0, 1]`,
//! so `κ² ≤ q ≤ κ² + 1`.
//!
//! Branches are integrated as `(ln k, z = k'/k)` with `z' = q - z²`, which keeps the
//! growing branch stable forward and the decaying branch stable backward without
//! overflow at any depth.

mod profile;

pub use profile::{
    bessel_order, decay_exponent_fit, normalization_bound, profile_from_k2, radial_mode_zero, radial_mode_zero_derivative,
    RadialProfile,
};

use crate::error::{HornError, Result};
use crate::geometry::{sphere_eigenvalue, HornParams};
use crate::numerics::{integrate_ode, quad_adaptive_with, DenseSolution, OdeOptions, QuadOptions};

/// Relative size of the certified tail remainder in the decaying-branch normalization.
pub const TAIL_RELATIVE_TARGET: f64 = 1e-13;

/// Threshold radius `r_μ = max(√A, (μ/(ε²A))^{ε/2})` in the `s` variable.
///
/// The defining property `0 ≤ A s^{-2} - (μ/ε²) s^{-2/ε-2} ≤ 1` for `s ≥ r_μ` is checked at
/// `r_μ` and returns a consistency error if it fails.
pub fn r_mu(p: &HornParams, mu: f64) -> Result<f64> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(HornError::domain(format!("mu = {mu} must be finite and >= 0")));
    }
    let eps = p.eps();
    let a = p.k_power();
    let big_a = a * (a + 1.0);
    let mut r = big_a.sqrt();
    if mu > 0.0 {
        r = r.max((mu / (eps * eps * big_a)).powf(0.5 * eps));
    }
    let bracket = big_a / (r * r) - mu / (eps * eps) * r.powf(-2.0 / eps - 2.0);
    let slack = 1e-12 * (1.0 + big_a / (r * r));
    if !(bracket >= -slack && bracket <= 1.0 + slack) {
        return Err(HornError::Consistency(format!("bracket {bracket} at r_mu = {r} outside [0, 1]")));
    }
    Ok(r)
}

/// Coefficients of `k'' = q(s) k` for one spherical mode and spectral parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KEquation {
    eps: f64,
    big_a: f64,
    kappa: f64,
    mu_term: f64,
    mu: f64,
    r_mu: f64,
    a: f64,
}

impl KEquation {
    /// The equation for spherical mode `i ≥ 1` and spectral parameter `μ ≥ 0`.
    pub fn new(p: &HornParams, i: u32, mu: f64) -> Result<Self> {
        if i == 0 {
            return Err(HornError::domain("the k-equation needs a mode index i >= 1"));
        }
        let r = r_mu(p, mu)?;
        let eps = p.eps();
        let a = p.k_power();
        let mu_i = sphere_eigenvalue(p.n(), i);
        Ok(KEquation {
            eps,
            big_a: a * (a + 1.0),
            kappa: 2.0 * mu_i.sqrt() / eps,
            mu_term: mu / (eps * eps),
            mu,
            r_mu: r,
            a,
        })
    }

    /// Constant-coefficient comparison equation `k'' = κ² k` started at `s0`.
    pub fn constant(kappa: f64, s0: f64) -> Self {
        KEquation { eps: 1.0, big_a: 0.0, kappa, mu_term: 0.0, mu: 0.0, r_mu: s0, a: 0.0 }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn r_mu(&self) -> f64 {
        self.r_mu
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `A = a(a+1)`.
    pub fn a_coefficient(&self) -> f64 {
        self.big_a
    }

    /// The power `a` in `g(s) = k(s) s^a`.
    pub fn k_power(&self) -> f64 {
        self.a
    }

    /// `A s^{-2} - (μ/ε²) s^{-2/ε-2}`, in `[0, 1]` for `s ≥ r_μ`.
    pub fn bracket(&self, s: f64) -> f64 {
        let mut b = self.big_a / (s * s);
        if self.mu_term != 0.0 {
            b -= self.mu_term * s.powf(-2.0 / self.eps - 2.0);
        }
        b
    }

    pub fn q(&self, s: f64) -> f64 {
        self.bracket(s) + self.kappa * self.kappa
    }

    pub fn dq(&self, s: f64) -> f64 {
        let mut d = -2.0 * self.big_a / (s * s * s);
        if self.mu_term != 0.0 {
            d += self.mu_term * (2.0 / self.eps + 2.0) * s.powf(-2.0 / self.eps - 3.0);
        }
        d
    }

    /// `s_max = r_μ + 10/κ + 5`.
    pub fn default_s_max(&self) -> f64 {
        self.r_mu + 10.0 / self.kappa + 5.0
    }

    /// Bounds `(ln lower, ln upper)` on the growing branch:
    /// `e^{-ln κ + κx} ≤ k⁽¹⁾ ≤ e^{(κ+1)x}`, `x = s - r_μ`.
    pub fn k1_log_bounds(&self, s: f64) -> (f64, f64) {
        let x = s - self.r_mu;
        (self.kappa * x - self.kappa.ln(), (self.kappa + 1.0) * x)
    }

    /// Bounds `(ln lower, ln upper)` on the decaying branch:
    /// `e^{-(κ+2)x} / (2(κ²+κ)) ≤ k⁽²⁾ ≤ (κ/2) e^{-(κ-1)x}`.
    pub fn k2_log_bounds(&self, s: f64) -> (f64, f64) {
        let x = s - self.r_mu;
        let k = self.kappa;
        (-(2.0 * (k * k + k)).ln() - (k + 2.0) * x, (0.5 * k).ln() - (k - 1.0) * x)
    }

    /// Certified upper bound on `∫_s^∞ (k⁽¹⁾)^{-2}` from `k⁽¹⁾ ≥ m e^{κx}`, `m = min(1, 1/κ)`.
    pub fn k1_tail_bound(&self, s: f64) -> f64 {
        let m = (1.0f64).min(1.0 / self.kappa);
        (-2.0 * self.kappa * (s - self.r_mu)).exp() / (2.0 * self.kappa * m * m)
    }

    /// Lower bound `1/(2(κ+1))` on `∫_{r_μ}^∞ (k⁽¹⁾)^{-2}`, from the upper sandwich of `k⁽¹⁾`.
    pub fn k1_integral_lower(&self) -> f64 {
        1.0 / (2.0 * (self.kappa + 1.0))
    }
}

fn riccati(eq: KEquation) -> impl FnMut(f64, &[f64], &mut [f64]) {
    move |s, y, dy| {
        dy[0] = y[1];
        dy[1] = eq.q(s) - y[1] * y[1];
    }
}

fn branch_ode_options() -> OdeOptions {
    OdeOptions::with_tol(1e-12, 1e-12)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchKind {
    /// `k⁽¹⁾` with `k(r_μ) = k'(r_μ) = 1`.
    Growing,
    /// `k⁽²⁾(s) = k⁽¹⁾(s) ∫_s^∞ (k⁽¹⁾)^{-2}`.
    Decaying,
}

/// Normalization data of the decaying branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailCertificate {
    /// End of the quadrature range; the remainder beyond it is bounded analytically.
    pub s_ext: f64,
    /// `∫_{r_μ}^∞ (k⁽¹⁾)^{-2}`, equal to `k⁽²⁾(r_μ)`.
    pub integral: f64,
    /// Estimate of `∫_{s_ext}^∞ (k⁽¹⁾)^{-2}` included in `integral`.
    pub tail_estimate: f64,
    /// Certified bound on `|integral - true value|`, relative to `integral`.
    pub relative_remainder: f64,
}

/// One solution of the k-equation, held as `(ln k, k'/k)` on `[r_μ, s_max]`.
#[derive(Clone, Debug)]
pub struct KBranch {
    eq: KEquation,
    kind: BranchKind,
    sol: DenseSolution,
    offset: f64,
    s_max: f64,
    tail: Option<TailCertificate>,
    companion: Option<Box<KBranch>>,
}

impl KBranch {
    pub fn equation(&self) -> &KEquation {
        &self.eq
    }

    pub fn kind(&self) -> BranchKind {
        self.kind
    }

    /// Represented range `[r_μ, s_max]`.
    pub fn span(&self) -> (f64, f64) {
        (self.eq.r_mu, self.s_max)
    }

    pub fn solution(&self) -> &DenseSolution {
        &self.sol
    }

    pub fn tail(&self) -> Option<&TailCertificate> {
        self.tail.as_ref()
    }

    /// The growing branch used to normalize a decaying one, extended to `s_ext`.
    pub fn companion(&self) -> Option<&KBranch> {
        self.companion.as_deref()
    }

    fn check(&self, s: f64) -> Result<()> {
        let (lo, hi) = self.span();
        let slack = 1e-12 * hi;
        if !(s >= lo - slack && s <= hi + slack) {
            return Err(HornError::domain(format!("s = {s} outside branch span [{lo}, {hi}]")));
        }
        Ok(())
    }

    pub fn ln_value(&self, s: f64) -> Result<f64> {
        self.check(s)?;
        Ok(self.sol.eval(s)?[0] + self.offset)
    }

    /// `k'/k`.
    pub fn log_derivative(&self, s: f64) -> Result<f64> {
        self.check(s)?;
        Ok(self.sol.eval(s)?[1])
    }

    /// `(ln k, k'/k)` in one evaluation.
    pub fn state(&self, s: f64) -> Result<(f64, f64)> {
        self.check(s)?;
        let y = self.sol.eval(s)?;
        Ok((y[0] + self.offset, y[1]))
    }

    pub fn value(&self, s: f64) -> Result<f64> {
        Ok(self.ln_value(s)?.exp())
    }

    pub fn derivative(&self, s: f64) -> Result<f64> {
        let (l, z) = self.state(s)?;
        Ok(z * l.exp())
    }

    /// Integrator mesh points inside the span, increasing.
    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = self.span();
        let mut g: Vec<f64> = self.sol.mesh().into_iter().filter(|&s| s >= lo && s <= hi).collect();
        g.sort_by(f64::total_cmp);
        g.dedup();
        if g.first() != Some(&lo) {
            g.insert(0, lo);
        }
        if g.last() != Some(&hi) {
            g.push(hi);
        }
        g
    }

    /// Relative residual `|k''/k - q| / q` from fourth-order centred differences of `ln k`.
    pub fn eqnk_residual(&self, s: f64) -> Result<f64> {
        let (lo, hi) = self.span();
        let h = 5e-3f64.min(0.125 * (hi - lo));
        if s - 2.0 * h < lo || s + 2.0 * h > hi {
            return Err(HornError::domain(format!("residual point s = {s} too close to the span ends")));
        }
        let y: Vec<f64> =
            [-2.0, -1.0, 0.0, 1.0, 2.0].iter().map(|k| self.ln_value(s + k * h)).collect::<Result<_>>()?;
        let d2 = (-y[4] + 16.0 * y[3] - 30.0 * y[2] + 16.0 * y[1] - y[0]) / (12.0 * h * h);
        let d1 = (-y[4] + 8.0 * y[3] - 8.0 * y[1] + y[0]) / (12.0 * h);
        let q = self.eq.q(s);
        Ok((d2 + d1 * d1 - q).abs() / q)
    }

    /// Wronskian `k⁽¹⁾ (k⁽²⁾)' - (k⁽¹⁾)' k⁽²⁾` of a decaying branch with its companion.
    pub fn wronskian(&self, s: f64) -> Result<f64> {
        let k1 = self
            .companion()
            .ok_or_else(|| HornError::domain("the Wronskian is defined on decaying branches"))?;
        let (l1, z1) = k1.state(s)?;
        let (l2, z2) = self.state(s)?;
        Ok((l1 + l2).exp() * (z2 - z1))
    }

    /// `ln k⁽²⁾(s)` evaluated directly from `k⁽¹⁾(s) ∫_s^∞ (k⁽¹⁾)^{-2}` by quadrature.
    ///
    /// This is independent of the backward Riccati integration that produces
    /// [`KBranch::ln_value`] away from `r_μ`.
    pub fn ln_value_by_quadrature(&self, s: f64) -> Result<f64> {
        self.check(s)?;
        let k1 = self
            .companion()
            .ok_or_else(|| HornError::domain("quadrature form is defined on decaying branches"))?;
        let tail = self.tail.expect("decaying branches carry a tail certificate");
        let l1 = k1.ln_value(s)?;
        let scaled = integrate_inverse_square(k1, s, tail.s_ext, l1)?;
        let tail_scaled = 0.5 * self.eq.k1_tail_bound(tail.s_ext) * (2.0 * l1).exp();
        Ok(l1 - 2.0 * l1 + (scaled + tail_scaled).ln())
    }
}

/// `∫_a^b e^{-2(ln k(u) - shift)} du` over the integrator mesh.
fn integrate_inverse_square(k: &KBranch, a: f64, b: f64, shift: f64) -> Result<f64> {
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-13, max_intervals: 200 };
    let mut nodes: Vec<f64> = k.sol.mesh().into_iter().filter(|&s| s > a && s < b).collect();
    nodes.sort_by(f64::total_cmp);
    nodes.insert(0, a);
    nodes.push(b);
    let mut total = 0.0;
    for w in nodes.windows(2) {
        let mut err = None;
        let r = quad_adaptive_with(
            |u| match k.sol.eval(u) {
                Ok(y) => (-2.0 * (y[0] + k.offset - shift)).exp(),
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            },
            w[0],
            w[1],
            &opts,
        );
        if let Some(e) = err {
            return Err(e);
        }
        total += r?.value;
    }
    Ok(total)
}

/// `s_max = r_μ + 10/κ + 5` for mode `i` at parameter `μ`.
pub fn default_s_max(p: &HornParams, i: u32, mu: f64) -> Result<f64> {
    Ok(KEquation::new(p, i, mu)?.default_s_max())
}

/// Growing branch on `[r_μ, s_max]` with `k(r_μ) = k'(r_μ) = 1`.
pub fn solve_k1(p: &HornParams, i: u32, mu: f64, s_max: f64) -> Result<KBranch> {
    let eq = KEquation::new(p, i, mu)?;
    solve_growing(eq, s_max)
}

/// Growing branch of an arbitrary [`KEquation`].
pub fn solve_growing(eq: KEquation, s_max: f64) -> Result<KBranch> {
    if !(s_max > eq.r_mu) || !s_max.is_finite() {
        return Err(HornError::domain(format!("s_max = {s_max} must exceed r_mu = {}", eq.r_mu)));
    }
    let sol = integrate_ode(riccati(eq), eq.r_mu, &[0.0, 1.0], s_max, &branch_ode_options())?;
    Ok(KBranch { eq, kind: BranchKind::Growing, sol, offset: 0.0, s_max, tail: None, companion: None })
}

/// Decaying branch on `[r_μ, s_max]`.
///
/// `k⁽²⁾(r_μ) = ∫_{r_μ}^∞ (k⁽¹⁾)^{-2}` is computed by quadrature up to `s_ext` plus an
/// analytic tail whose uncertainty is at most [`TAIL_RELATIVE_TARGET`] of the integral;
/// the shape on the rest of the span comes from backward integration of `z = k'/k`.
pub fn solve_k2(p: &HornParams, i: u32, mu: f64, s_max: f64) -> Result<KBranch> {
    let eq = KEquation::new(p, i, mu)?;
    solve_decaying(eq, s_max)
}

/// Decaying branch of an arbitrary [`KEquation`].
pub fn solve_decaying(eq: KEquation, s_max: f64) -> Result<KBranch> {
    if !(s_max > eq.r_mu) || !s_max.is_finite() {
        return Err(HornError::domain(format!("s_max = {s_max} must exceed r_mu = {}", eq.r_mu)));
    }
    let kappa = eq.kappa;
    if !(kappa > 0.0) {
        return Err(HornError::domain("the decaying branch needs kappa > 0"));
    }
    let m = (1.0f64).min(1.0 / kappa);
    let x_tail = (1.0 / (2.0 * kappa * m * m * TAIL_RELATIVE_TARGET * eq.k1_integral_lower())).ln() / (2.0 * kappa);
    let s_ext = (s_max + 20.0 / kappa).max(eq.r_mu + x_tail);

    let k1 = solve_growing(eq, s_ext)?;
    let body = integrate_inverse_square(&k1, eq.r_mu, s_ext, 0.0)?;
    let tail_bound = eq.k1_tail_bound(s_ext);
    let integral = body + 0.5 * tail_bound;
    let relative_remainder = 0.5 * tail_bound / integral;

    let z_start = -eq.q(s_ext).sqrt() - eq.dq(s_ext) / (4.0 * eq.q(s_ext));
    let sol = integrate_ode(riccati(eq), s_ext, &[0.0, z_start], eq.r_mu, &branch_ode_options())?;
    let offset = integral.ln() - sol.y_end()[0];
    Ok(KBranch {
        eq,
        kind: BranchKind::Decaying,
        sol,
        offset,
        s_max,
        tail: Some(TailCertificate { s_ext, integral, tail_estimate: 0.5 * tail_bound, relative_remainder }),
        companion: Some(Box::new(k1)),
    })
}

/// `z = k'/k` of the decaying branch at `s ≥ r_μ`, without normalizing it.
///
/// This is the tip boundary data used by shooting: only the log-derivative of the
/// tip-decaying solution is needed there.
pub fn decaying_log_derivative(eq: &KEquation, s: f64) -> Result<f64> {
    if !(s >= eq.r_mu) {
        return Err(HornError::domain(format!("s = {s} below r_mu = {}", eq.r_mu)));
    }
    let s_ext = s + 25.0 / eq.kappa.max(0.5);
    let z_start = -eq.q(s_ext).sqrt() - eq.dq(s_ext) / (4.0 * eq.q(s_ext));
    let sol = integrate_ode(riccati(*eq), s_ext, &[0.0, z_start], s, &branch_ode_options())?;
    Ok(sol.y_end()[1])
}

/// `(k⁽²⁾(r_μ))² + ((k⁽²⁾)'(r_μ))²`, the boundary size compared with `C(ε, i)^{±1}`.
pub fn k2_boundary_size(k2: &KBranch) -> Result<f64> {
    let r = k2.span().0;
    let v = k2.value(r)?;
    let d = k2.derivative(r)?;
    Ok(v * v + d * d)
}
