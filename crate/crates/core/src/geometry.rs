//! Horn parameters and closed-form geometry.
//!
//! The weighted measure is represented by its radial density `w(r)` against the round
//! unit-sphere measure, so `dm = w(r) dr dS(θ)`. The distance to the tip is the radial
//! coordinate itself and `|∇r| = 1` away from the tip.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{HornError, Result};
use crate::numerics::gamma::ln_gamma;

/// Dimensional and shape parameters of a metric horn.
///
/// `c = (n-1)(1+ε) + (N-n)(1-η)` is the drift exponent: the radial measure density is
/// proportional to `r^c` and the radial Laplacian carries the drift `(c/r) ∂_r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HornParams {
    n: u32,
    big_n: f64,
    eps: f64,
    eta: f64,
    c: f64,
}

impl HornParams {
    pub fn new(n: u32, big_n: f64, eps: f64, eta: f64) -> Result<Self> {
        if n < 2 {
            return Err(HornError::domain(format!("n = {n} must be at least 2")));
        }
        if !big_n.is_finite() || big_n < n as f64 {
            return Err(HornError::domain(format!("N = {big_n} must satisfy N >= n = {n}")));
        }
        if !eps.is_finite() || eps <= 0.0 {
            return Err(HornError::domain(format!("eps = {eps} must be positive")));
        }
        if !eta.is_finite() || eta <= 0.0 || eta >= 1.0 {
            return Err(HornError::domain(format!("eta = {eta} must lie in (0, 1)")));
        }
        let nf = n as f64;
        let c = (nf - 1.0) * (1.0 + eps) + (big_n - nf) * (1.0 - eta);
        let shift = c - 1.0 - eps;
        // Values within rounding of zero count as zero.
        if shift <= 1e-12 * (1.0 + c) {
            return Err(HornError::domain(format!(
                "c - 1 - eps = {shift} must be positive (c = {c}, eps = {eps})"
            )));
        }
        Ok(HornParams { n, big_n, eps, eta, c })
    }

    /// The parameter set used throughout the examples: n = 3, N = 4, ε = 1/2, η = 1/4.
    pub fn standard() -> Self {
        HornParams::new(3, 4.0, 0.5, 0.25).expect("standard parameters are valid")
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// The synthetic dimension N.
    pub fn big_n(&self) -> f64 {
        self.big_n
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Drift exponent `c`.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// `c - 1 - ε`, positive by construction.
    pub fn tip_shift(&self) -> f64 {
        self.c - 1.0 - self.eps
    }

    /// `(c - 1 - ε) / (2ε)`: the power relating `g` and `k` in `g(s) = k(s) s^a`.
    pub fn k_power(&self) -> f64 {
        self.tip_shift() / (2.0 * self.eps)
    }

    /// `c - (n - 1)`, the constant on the right of the `(log I)'` identity (times `1/r`).
    ///
    /// Computed from the defining combination `N - n + (n-1)ε - (N-n)η` rather than
    /// from `c`, so the two can be compared.
    pub fn log_i_constant(&self) -> f64 {
        let nf = self.n as f64;
        self.big_n - nf + (nf - 1.0) * self.eps - (self.big_n - nf) * self.eta
    }
}

/// Builds [`HornParams`], validating the admissible ranges.
pub fn make_horn_params(n: u32, big_n: f64, eps: f64, eta: f64) -> Result<HornParams> {
    HornParams::new(n, big_n, eps, eta)
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    n: u32,
    #[serde(rename = "N")]
    big_n: f64,
    eps: f64,
    eta: f64,
}

impl Serialize for HornParams {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RawParams { n: self.n, big_n: self.big_n, eps: self.eps, eta: self.eta }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HornParams {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        // Any stored "c" is ignored: it is always recomputed.
        let raw = RawParams::deserialize(deserializer)?;
        HornParams::new(raw.n, raw.big_n, raw.eps, raw.eta).map_err(serde::de::Error::custom)
    }
}

/// Radial density `w(r) = 2^{1-n} r^c` of the weighted measure.
pub fn measure_weight(p: &HornParams, r: f64) -> Result<f64> {
    Ok(log_measure_weight(p, r)?.exp())
}

/// `ln w(r)`.
pub fn log_measure_weight(p: &HornParams, r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(HornError::domain(format!("measure weight needs r > 0, got {r}")));
    }
    Ok(ln_weight_unchecked(p, r))
}

#[inline]
pub(crate) fn ln_weight_unchecked(p: &HornParams, r: f64) -> f64 {
    (1.0 - p.n as f64) * std::f64::consts::LN_2 + p.c * r.ln()
}

/// Coefficient of `r^{α-2}` in `Δ r^α`, namely `α(α + c - 1)`.
pub fn laplacian_radial_power(p: &HornParams, alpha: f64) -> f64 {
    alpha * (alpha + p.c - 1.0)
}

/// Radial and spherical multipliers of `Hess(r²) = 2 dr⊗dr + 2(1+ε) f(r)² g_sphere`.
pub fn hess_r2_multipliers(p: &HornParams) -> (f64, f64) {
    (2.0, 2.0 * (1.0 + p.eps))
}

/// `4 r^{-2-2ε}`, the factor multiplying the spherical Laplacian.
pub fn angular_coupling(p: &HornParams, r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(HornError::domain(format!("angular coupling needs r > 0, got {r}")));
    }
    Ok(angular_coupling_unchecked(p, r))
}

#[inline]
pub(crate) fn angular_coupling_unchecked(p: &HornParams, r: f64) -> f64 {
    4.0 * r.powf(-2.0 - 2.0 * p.eps)
}

/// Eigenvalue `μ_i = i(n + i - 2)` of `-Δ` on the round `S^{n-1}`.
pub fn sphere_eigenvalue(n: u32, i: u32) -> f64 {
    let (n, i) = (n as f64, i as f64);
    i * (n + i - 2.0)
}

/// Area `ω_{n-1} = 2π^{n/2} / Γ(n/2)` of the round unit sphere `S^{n-1}`.
pub fn sphere_area(n: u32) -> f64 {
    let h = n as f64 / 2.0;
    (std::f64::consts::LN_2 + h * std::f64::consts::PI.ln() - ln_gamma(h)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn drift_exponent_examples() {
        assert!(close(make_horn_params(3, 4.0, 0.5, 0.25).unwrap().c(), 3.75, 1e-15));
        assert!(close(make_horn_params(3, 3.0, 0.5, 0.25).unwrap().c(), 3.0, 1e-15));
        match make_horn_params(2, 2.0, 0.1, 0.5) {
            Err(HornError::Domain(msg)) => assert!(msg.contains("c - 1 - eps"), "{msg}"),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn range_violations_are_named() {
        for (n, bn, e, h, key) in [
            (1, 2.0, 0.5, 0.5, "n ="),
            (3, 2.5, 0.5, 0.5, "N ="),
            (3, 4.0, 0.0, 0.5, "eps ="),
            (3, 4.0, 0.5, 1.0, "eta ="),
            (3, 4.0, 0.5, 0.0, "eta ="),
        ] {
            let err = make_horn_params(n, bn, e, h).unwrap_err().to_string();
            assert!(err.contains(key), "{err}");
        }
    }

    #[test]
    fn weight_values() {
        let p = HornParams::standard();
        assert!(close(measure_weight(&p, 1.0).unwrap(), 0.25, 1e-15));
        assert!(close(measure_weight(&p, 2.0).unwrap(), 0.25 * 2f64.powf(3.75), 1e-14));
        assert!(close(measure_weight(&p, 2.0).unwrap(), 3.363585661014858, 1e-12));
        assert!(measure_weight(&p, 0.0).is_err());
        assert!(measure_weight(&p, -1.0).is_err());
        let q = HornParams::new(5, 7.5, 0.3, 0.6).unwrap();
        assert!(close(measure_weight(&q, 1.0).unwrap(), 2f64.powi(-4), 1e-15));
    }

    #[test]
    fn weight_matches_warped_volume_element() {
        // (r^{1+ε}/2)^{n-1} e^{-ψ(r)} with ψ = -(N-n)(1-η) log r.
        for p in [HornParams::standard(), HornParams::new(4, 6.2, 0.8, 0.1).unwrap()] {
            for r in [0.01f64, 0.3, 1.0, 2.0, 7.5] {
                let nf = p.n() as f64;
                let warp = 0.5 * r.powf(1.0 + p.eps());
                let psi = -(p.big_n() - nf) * (1.0 - p.eta()) * r.ln();
                let oracle = warp.powf(nf - 1.0) * (-psi).exp();
                assert!(close(measure_weight(&p, r).unwrap(), oracle, 1e-13));
            }
        }
    }

    #[test]
    fn laplacian_of_powers() {
        let p = HornParams::standard();
        assert!(close(laplacian_radial_power(&p, 2.0), 9.5, 1e-15));
        assert_eq!(laplacian_radial_power(&p, 0.0), 0.0);
        assert!(laplacian_radial_power(&p, 1.0 - p.c()).abs() < 1e-15);
        // Direct form from the warped-product Laplacian.
        let alpha = 1.3;
        let nf = p.n() as f64;
        let direct = alpha
            * (alpha + p.big_n() - 2.0 + (nf - 1.0) * p.eps() - (p.big_n() - nf) * p.eta());
        assert!(close(laplacian_radial_power(&p, alpha), direct, 1e-14));
    }

    #[test]
    fn hessian_and_coupling() {
        let p = HornParams::standard();
        assert_eq!(hess_r2_multipliers(&p), (2.0, 3.0));
        let (a, b) = hess_r2_multipliers(&p);
        assert!(close(b - a, 2.0 * p.eps(), 1e-15));
        assert!(close(angular_coupling(&p, 1.0).unwrap(), 4.0, 1e-15));
        assert!(close(angular_coupling(&p, 2.0).unwrap(), 0.5, 1e-15));
        assert!(angular_coupling(&p, 0.0).is_err());
    }

    #[test]
    fn sphere_data() {
        assert_eq!(sphere_eigenvalue(3, 0), 0.0);
        assert_eq!(sphere_eigenvalue(3, 1), 2.0);
        assert_eq!(sphere_eigenvalue(3, 2), 6.0);
        assert_eq!(sphere_eigenvalue(4, 3), 15.0);
        assert!(close(sphere_area(3), 4.0 * std::f64::consts::PI, 1e-14));
        assert!(close(sphere_area(2), 2.0 * std::f64::consts::PI, 1e-14));
    }

    #[test]
    fn json_round_trip_recomputes_c() {
        let p = HornParams::standard();
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(text, r#"{"n":3,"N":4.0,"eps":0.5,"eta":0.25}"#);
        let back: HornParams =
            serde_json::from_str(r#"{"n":3,"N":4.0,"eps":0.5,"eta":0.25,"c":99.0}"#).unwrap();
        assert_eq!(back.c(), 3.75);
        assert!(serde_json::from_str::<HornParams>(r#"{"n":2,"N":2,"eps":0.1,"eta":0.5}"#).is_err());
    }
}
