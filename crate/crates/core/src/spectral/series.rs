//! Truncated caloric series `f(r, t) = Σ_{j ≤ K} c_j e^{-ν_j t} g_j(r)`.

use serde::Serialize;

use super::EigenPair;
use crate::error::{HornError, Result};
use crate::geometry::{ln_weight_unchecked, HornParams};
use crate::numerics::{fit_line, ln_gamma, ln_upper_gamma, quad_adaptive_with, LineFit, QuadOptions, SignedLog};
use crate::output::{Cell, CsvTable};

/// A caloric series over eigenpairs sharing one spherical index.
///
/// The first `truncation` coefficients are summed. The certificate bounds every
/// continuation of the series whose coefficients stay below `coefficient_bound`,
/// assuming `sup|g_j| ≤ growth_constant · ν_j` and the Weyl lower bound beyond the
/// computed eigenvalues (see [`tail_bound`]); it is valid for all `t ≥ t_min`.
#[derive(Clone, Debug)]
pub struct CaloricSeries {
    pairs: Vec<EigenPair>,
    coeffs: Vec<f64>,
    truncation: usize,
    t_min: f64,
    coefficient_bound: f64,
    growth_constant: f64,
    tail_certificate: f64,
}

impl CaloricSeries {
    /// Series with explicit coefficients, one per pair, all summed.
    pub fn new(pairs: Vec<EigenPair>, coeffs: Vec<f64>, t_min: f64) -> Result<Self> {
        let bound = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        Self::assemble(pairs, coeffs, t_min, bound)
    }

    /// Coefficients `c_j = ∫ u0 g_j w dr` of an initial profile; Bessel's inequality
    /// `|c_j| ≤ ‖u0‖` supplies the coefficient bound.
    pub fn project<F>(pairs: Vec<EigenPair>, u0: F, t_min: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64,
    {
        let first = pairs.first().ok_or_else(|| HornError::domain("a caloric series needs at least one pair"))?;
        let p = *first.g().params();
        let opts = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-11, max_intervals: 4000 };
        let r_out = first.r_out();
        let norm2 = quad_adaptive_with(
            |r| {
                let v = u0(r);
                v * v * ln_weight_unchecked(&p, r).exp()
            },
            0.0,
            r_out,
            &opts,
        )?
        .value;
        let mut coeffs = Vec::with_capacity(pairs.len());
        for pair in &pairs {
            let g = pair.g();
            let mut failure = None;
            let mut density = |r: f64| match g.eval(r) {
                Ok((v, _)) => u0(r) * v.scale_ln(ln_weight_unchecked(&p, r)).to_f64(),
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            };
            let inner = quad_adaptive_with(&mut density, g.r_floor(), g.r_start(), &opts)?.value;
            let outer = quad_adaptive_with(&mut density, g.r_start(), r_out, &opts)?.value;
            if let Some(e) = failure {
                return Err(e);
            }
            coeffs.push(inner + outer);
        }
        let bound = coeffs.iter().fold(norm2.sqrt(), |m, c| m.max(c.abs()));
        Self::assemble(pairs, coeffs, t_min, bound)
    }

    fn assemble(pairs: Vec<EigenPair>, coeffs: Vec<f64>, t_min: f64, coefficient_bound: f64) -> Result<Self> {
        if pairs.is_empty() {
            return Err(HornError::domain("a caloric series needs at least one pair"));
        }
        if pairs.len() != coeffs.len() {
            return Err(HornError::domain(format!("{} pairs but {} coefficients", pairs.len(), coeffs.len())));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(HornError::domain("coefficients must be finite"));
        }
        if !(t_min > 0.0) {
            return Err(HornError::domain(format!("t_min must be positive, got {t_min}")));
        }
        let first = &pairs[0];
        for w in pairs.windows(2) {
            if !(w[1].nu() > w[0].nu()) {
                return Err(HornError::domain("eigenvalues must be strictly increasing"));
            }
        }
        if pairs.iter().any(|q| {
            q.mode_index() != first.mode_index() || q.r_out() != first.r_out() || q.g().params() != first.g().params()
        }) {
            return Err(HornError::domain("pairs must share the spherical index, r_out and parameters"));
        }
        let growth_constant = pairs.iter().map(|q| q.ln_max_abs().exp() / q.nu()).fold(0.0, f64::max);
        let mut s = CaloricSeries {
            truncation: pairs.len(),
            pairs,
            coeffs,
            t_min,
            coefficient_bound,
            growth_constant,
            tail_certificate: 0.0,
        };
        s.tail_certificate = s.certificate_at(t_min)?;
        Ok(s)
    }

    /// The same series summed over its first `k` terms only.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.pairs.len() {
            return Err(HornError::domain(format!("truncation {k} outside 1..={}", self.pairs.len())));
        }
        let mut s = self.clone();
        s.truncation = k;
        s.tail_certificate = s.certificate_at(self.t_min)?;
        Ok(s)
    }

    /// Bound on `|f_∞ - f_K|` at time `t` for every `r`.
    pub fn certificate_at(&self, t: f64) -> Result<f64> {
        let params = *self.pairs[0].g().params();
        Ok(self.coefficient_bound * self.growth_constant * tail_bound(&self.pairs, self.truncation, t, &params)?)
    }

    pub fn pairs(&self) -> &[EigenPair] {
        &self.pairs
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn mode_index(&self) -> u32 {
        self.pairs[0].mode_index()
    }

    pub fn params(&self) -> &HornParams {
        self.pairs[0].g().params()
    }

    pub fn r_out(&self) -> f64 {
        self.pairs[0].r_out()
    }

    /// Smallest radius at which every retained eigenfunction can be evaluated.
    pub fn r_floor(&self) -> f64 {
        self.active().map(|q| q.g().r_floor()).fold(0.0, f64::max)
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn tail_certificate(&self) -> f64 {
        self.tail_certificate
    }

    pub fn coefficient_bound(&self) -> f64 {
        self.coefficient_bound
    }

    /// `max_j sup|g_j| / ν_j` over the computed pairs.
    pub fn growth_constant(&self) -> f64 {
        self.growth_constant
    }

    fn active(&self) -> impl Iterator<Item = &EigenPair> {
        self.pairs.iter().take(self.truncation)
    }

    /// `∂_t^k f(r, t)` together with `∂_r ∂_t^k f(r, t)`, for any real `t`.
    pub(crate) fn derivatives_at(&self, k: u32, r: f64, t: f64) -> Result<(SignedLog, SignedLog)> {
        let mut values = Vec::with_capacity(self.truncation);
        let mut slopes = Vec::with_capacity(self.truncation);
        for (pair, &c) in self.active().zip(&self.coeffs) {
            if c == 0.0 {
                continue;
            }
            let (g, gp) = pair.g().eval(r)?;
            let sign = c.signum() * if k % 2 == 1 { -1.0 } else { 1.0 };
            let ln_factor = c.abs().ln() + k as f64 * pair.nu().ln() - pair.nu() * t;
            let factor = SignedLog::new(sign, ln_factor);
            values.push(factor * g);
            slopes.push(factor * gp);
        }
        Ok((SignedLog::sum(values), SignedLog::sum(slopes)))
    }
}

/// Upper bound on `Σ_{j>k} ν_j e^{-ν_j t}`, the dropped tail for unit coefficients.
///
/// Computed eigenvalues are summed directly. Beyond them `ν_j ≥ C1 j^{2/N}`, with `C1`
/// fitted over the upper half of the computed list, where `j^{2/N}` growth is
/// representative. As `x e^{-xt}` decreases for `x ≥ 1/t`, the remaining sum is at most
/// `(1/(et))` per index below `(C1 t)^{-N/2}` plus the integral
/// `∫_J^∞ C1 x^{2/N} e^{-C1 t x^{2/N}} dx = (N/2) (C1 t)^{-N/2} t^{-1} Γ(N/2 + 1, C1 t J^{2/N})`.
pub fn tail_bound(eigs: &[EigenPair], k: usize, t: f64, p: &HornParams) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(HornError::domain(format!("tail bound needs t > 0, got {t}")));
    }
    let count = eigs.len();
    if count == 0 || k > count {
        return Err(HornError::domain(format!("tail index {k} outside 0..={count}")));
    }
    let computed: f64 = eigs[k..].iter().map(|q| q.nu() * (-q.nu() * t).exp()).sum();
    let half_n = 0.5 * p.big_n();
    let gamma = 1.0 / half_n;
    let c1 = eigs
        .iter()
        .enumerate()
        .skip(count / 2)
        .map(|(j, q)| q.nu() / ((j + 1) as f64).powf(gamma))
        .fold(f64::INFINITY, f64::min);
    let turning = (1.0 / (c1 * t)).powf(half_n);
    let mut start = count as f64;
    let mut plateau = 0.0;
    if turning > start {
        let top = turning.ceil();
        plateau = (top - start) / (std::f64::consts::E * t);
        start = top;
    }
    let y = c1 * t * start.powf(gamma);
    let ln_integral = half_n.ln() - half_n * (c1 * t).ln() - t.ln() + ln_upper_gamma(half_n + 1.0, y)?;
    Ok(computed + plateau + ln_integral.exp())
}

/// `f(r, t)` for `t > 0` in signed-log form.
pub fn evaluate_caloric(s: &CaloricSeries, r: f64, t: f64) -> Result<SignedLog> {
    time_derivative(s, 0, r, t)
}

/// `∂_t^k f(r, t) = Σ c_j (-ν_j)^k e^{-ν_j t} g_j(r)` for `t > 0`.
pub fn time_derivative(s: &CaloricSeries, k: u32, r: f64, t: f64) -> Result<SignedLog> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(HornError::domain(format!("caloric evaluation needs t > 0, got {t}")));
    }
    Ok(s.derivatives_at(k, r, t)?.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalyticityReport {
    pub t0: f64,
    pub r0: f64,
    pub kmax: u32,
    /// `+∞` (written as `null`) for the zero solution.
    pub fitted_radius: f64,
    /// `ln|a_k|` for `k = 0..=kmax`, where `a_k = ∂_t^k f(r0, t0) / k!`.
    pub coefficients: Vec<f64>,
}

/// Radius of convergence in `t` at `(r0, t0)` from the Taylor coefficients `a_k`,
/// estimated as `1 / max_{kmax/2 ≤ k ≤ kmax} |a_k|^{1/k}`.
pub fn analyticity_probe(s: &CaloricSeries, r0: f64, t0: f64, kmax: u32) -> Result<AnalyticityReport> {
    if kmax < 8 {
        return Err(HornError::domain(format!("kmax must be at least 8, got {kmax}")));
    }
    let coefficients: Vec<f64> = (0..=kmax)
        .map(|k| Ok(time_derivative(s, k, r0, t0)?.ln_abs - ln_gamma(k as f64 + 1.0)))
        .collect::<Result<_>>()?;
    let worst = (kmax / 2..=kmax)
        .filter(|&k| k > 0)
        .map(|k| coefficients[k as usize] / k as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    let fitted_radius = if worst == f64::NEG_INFINITY { f64::INFINITY } else { (-worst).exp() };
    Ok(AnalyticityReport { t0, r0, kmax, fitted_radius, coefficients })
}

/// Fit of `ln|f(r, t)|` against `r^{-ε}` over `r_grid`; the slope measures the decay rate.
pub fn caloric_decay_check(s: &CaloricSeries, r_grid: &[f64], t: f64) -> Result<LineFit> {
    if s.mode_index() == 0 {
        return Err(HornError::domain("the decay check excludes the radial (i = 0) part"));
    }
    let e = s.params().eps();
    let mut x = Vec::with_capacity(r_grid.len());
    let mut y = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let v = evaluate_caloric(s, r, t)?;
        if v.is_zero() {
            return Err(HornError::Nodal { quantity: "f", at: r });
        }
        x.push(r.powf(-e));
        y.push(v.ln_abs);
    }
    fit_line(&x, &y)
}

/// Caloric scan with header `r,t,sign,log_mag`, one row per `(t, r)`.
pub fn caloric_table(s: &CaloricSeries, r_grid: &[f64], t_list: &[f64]) -> Result<CsvTable> {
    let mut table = CsvTable::new(&["r", "t", "sign", "log_mag"]);
    for &t in t_list {
        for &r in r_grid {
            let v = evaluate_caloric(s, r, t)?;
            table.push(vec![Cell::Real(r), Cell::Real(t), Cell::Int(v.sign as i64), Cell::Real(v.ln_abs)]);
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::super::dirichlet_eigenvalues;
    use super::*;

    fn pairs(count: usize) -> Vec<EigenPair> {
        dirichlet_eigenvalues(&HornParams::standard(), 1, 4.0, count).unwrap()
    }

    #[test]
    fn single_pair_closed_forms() {
        let ps = pairs(1);
        let nu = ps[0].nu();
        let s = CaloricSeries::new(ps.clone(), vec![1.0], 0.1).unwrap();
        for r in [0.05, 0.5, 2.0] {
            let g = ps[0].g().eval(r).unwrap().0;
            for t in [0.25, 1.0] {
                let v = evaluate_caloric(&s, r, t).unwrap();
                assert_eq!(v.sign, g.sign);
                assert!((v.ln_abs - (g.ln_abs - nu * t)).abs() < 1e-12);
                for k in 0..5u32 {
                    let d = time_derivative(&s, k, r, t).unwrap();
                    assert!((d.ln_abs - (k as f64 * nu.ln() - nu * t + g.ln_abs)).abs() < 1e-12);
                    assert_eq!(d.sign, g.sign * if k % 2 == 1 { -1.0 } else { 1.0 });
                }
            }
        }
        let doubled = CaloricSeries::new(ps, vec![2.0], 0.1).unwrap();
        let (a, b) = (evaluate_caloric(&s, 0.5, 0.5).unwrap(), evaluate_caloric(&doubled, 0.5, 0.5).unwrap());
        assert!((b.ln_abs - a.ln_abs - 2f64.ln()).abs() < 1e-13);
        assert!(evaluate_caloric(&s, 0.5, 0.0).is_err());
    }

    #[test]
    fn time_derivative_matches_finite_difference() {
        let s = CaloricSeries::new(pairs(3), vec![1.0, -0.5, 0.25], 0.1).unwrap();
        let (r, t, h) = (1.3, 0.5, 1e-5);
        let fd = (evaluate_caloric(&s, r, t + h).unwrap().to_f64() - evaluate_caloric(&s, r, t - h).unwrap().to_f64())
            / (2.0 * h);
        let d = time_derivative(&s, 1, r, t).unwrap().to_f64();
        assert!((fd / d - 1.0).abs() < 1e-6, "{fd} vs {d}");
    }

    #[test]
    fn tail_bound_properties() {
        let p = HornParams::standard();
        let ps = pairs(12);
        let b = |k: usize, t: f64| tail_bound(&ps, k, t, &p).unwrap();
        assert!(b(4, 0.5) > b(4, 1.0) && b(4, 1.0) > b(4, 2.0));
        assert!(b(2, 1.0) > b(4, 1.0) && b(4, 1.0) > b(8, 1.0));
        for t in [0.25, 1.0] {
            let partial: f64 = ps[8..].iter().map(|q| q.nu() * (-q.nu() * t).exp()).sum();
            assert!(b(8, t) >= partial);
        }
        let lead = ps[0].nu() * (-ps[0].nu()).exp();
        assert!(b(8, 1.0) < 1e-6 * lead, "{} vs {lead}", b(8, 1.0));
        assert!(tail_bound(&ps, 8, 0.0, &p).is_err());
    }

    #[test]
    fn truncation_error_within_certificate() {
        let s = CaloricSeries::new(pairs(6), vec![1.0, 0.8, -0.6, 0.4, 0.3, -0.2], 0.25).unwrap();
        let short = s.truncated(4).unwrap();
        for r in [0.1, 0.9, 2.5] {
            for t in [0.25, 0.5] {
                let full = evaluate_caloric(&s, r, t).unwrap().to_f64();
                let part = evaluate_caloric(&short, r, t).unwrap().to_f64();
                assert!((full - part).abs() <= short.certificate_at(t).unwrap());
            }
        }
        assert!(short.tail_certificate() >= short.certificate_at(1.0).unwrap());
    }

    #[test]
    fn projection_recovers_coefficients() {
        let ps = pairs(4);
        let target = [0.7, -0.2, 0.1, 0.05];
        let basis = ps.clone();
        let u0 = move |r: f64| {
            basis.iter().zip(target).map(|(q, c)| if r < q.g().r_floor() { 0.0 } else { c * q.g().value(r).unwrap() }).sum()
        };
        let s = CaloricSeries::project(ps, u0, 0.5).unwrap();
        for (c, t) in s.coeffs().iter().zip(target) {
            assert!((c - t).abs() < 1e-7, "{c} vs {t}");
        }
        assert!(s.coefficient_bound() >= 0.7);
    }

    #[test]
    fn analyticity_radius() {
        let ps = pairs(2);
        let one = CaloricSeries::new(ps[..1].to_vec(), vec![1.0], 0.1).unwrap();
        let r16 = analyticity_probe(&one, 1.0, 0.5, 16).unwrap().fitted_radius;
        let r24 = analyticity_probe(&one, 1.0, 0.5, 24).unwrap().fitted_radius;
        assert!(r24 > r16 && r16 > 0.0);
        let zero = CaloricSeries::new(ps[..1].to_vec(), vec![0.0], 0.1).unwrap();
        assert_eq!(analyticity_probe(&zero, 1.0, 0.5, 16).unwrap().fitted_radius, f64::INFINITY);
        assert!(analyticity_probe(&one, 1.0, 0.5, 4).is_err());
    }

    #[test]
    fn radial_part_is_excluded_from_decay_check() {
        let ps = dirichlet_eigenvalues(&HornParams::standard(), 0, 4.0, 2).unwrap();
        let s = CaloricSeries::new(ps, vec![1.0, 1.0], 0.1).unwrap();
        assert!(caloric_decay_check(&s, &[0.05, 0.1], 0.5).is_err());
    }

    #[test]
    fn caloric_csv_layout() {
        let s = CaloricSeries::new(pairs(1), vec![1.0], 0.1).unwrap();
        let t = caloric_table(&s, &[0.1, 0.2], &[0.5]).unwrap();
        assert_eq!(t.header(), &["r", "t", "sign", "log_mag"]);
        assert_eq!(t.rows().len(), 2);
    }
}
