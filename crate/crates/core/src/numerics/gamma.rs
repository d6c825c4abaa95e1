//! Gamma function for real arguments (Lanczos, g = 7, nine terms).

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(z: f64) -> f64 {
    // z is the shifted argument x - 1
    let mut acc = LANCZOS_COEFFS[0];
    for (k, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (z + k as f64);
    }
    acc
}

/// `Γ(x)` for real `x`; poles return `NaN`.
pub fn gamma(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 && x == x.floor() {
        return f64::NAN;
    }
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    if x > 171.7 {
        return f64::INFINITY;
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * lanczos_sum(z)
}

/// `ln |Γ(x)|` for real `x`.
pub fn ln_gamma(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 && x == x.floor() {
        return f64::INFINITY;
    }
    if x < 0.5 {
        return PI.ln() - (PI * x).sin().abs().ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln()
}

/// `ln Γ(s, y)`, the upper incomplete gamma function, for `s > 0` and `y ≥ 0`.
///
/// For `y ≥ 1` the integral is written as `e^{-y} y^{s-1} ∫_0^∞ (1 + u/y)^{s-1} e^{-u} du`
/// so that large `y` neither under- nor overflows.
pub fn ln_upper_gamma(s: f64, y: f64) -> crate::error::Result<f64> {
    use crate::numerics::{quad_semi_infinite, QuadOptions};
    if !(s > 0.0) || !(y >= 0.0) || !y.is_finite() {
        return Err(crate::error::HornError::domain(format!("upper gamma needs s > 0, y >= 0; got ({s}, {y})")));
    }
    let opts = QuadOptions::with_tol(0.0, 1e-13);
    if y < 1.0 {
        let r = quad_semi_infinite(|x| x.powf(s - 1.0) * (-x).exp(), y, 1.0, &opts)?;
        return Ok(r.value.ln());
    }
    let r = quad_semi_infinite(|u| ((s - 1.0) * (u / y).ln_1p() - u).exp(), 0.0, 1.0, &opts)?;
    Ok(-y + (s - 1.0) * y.ln() + r.value.ln())
}

/// Chebyshev series for the Temme auxiliaries `Γ₁(μ)`, `Γ₂(μ)` on `|μ| <= 1/2`.
const GAM1_CHEB: [f64; 7] = [
    -1.142_022_680_371_168e0,
    6.516_511_267_073_7e-3,
    3.087_090_173_086e-4,
    -3.470_626_964_9e-6,
    6.943_766_4e-9,
    3.677_95e-11,
    -1.356e-13,
];
const GAM2_CHEB: [f64; 8] = [
    1.843_740_587_300_905e0,
    -7.685_284_084_478_67e-2,
    1.271_927_136_654_6e-3,
    -4.971_736_704_2e-6,
    -3.312_611_98e-8,
    2.423_096e-10,
    -1.702e-13,
    -1.49e-15,
];

fn chebyshev_eval(coeffs: &[f64], y: f64) -> f64 {
    let (mut d, mut dd) = (0.0, 0.0);
    let y2 = 2.0 * y;
    for &c in coeffs.iter().skip(1).rev() {
        let sv = d;
        d = y2 * d - dd + c;
        dd = sv;
    }
    y * d - dd + 0.5 * coeffs[0]
}

/// Temme auxiliaries for `|μ| <= 1/2`:
/// `(Γ₁, Γ₂, 1/Γ(1+μ), 1/Γ(1-μ))` with
/// `Γ₁ = (1/Γ(1-μ) - 1/Γ(1+μ)) / (2μ)` and `Γ₂ = (1/Γ(1-μ) + 1/Γ(1+μ)) / 2`.
pub(crate) fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let y = 8.0 * mu * mu - 1.0;
    let g1 = chebyshev_eval(&GAM1_CHEB, y);
    let g2 = chebyshev_eval(&GAM2_CHEB, y);
    (g1, g2, g2 - mu * g1, g2 + mu * g1)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Stirling series with recurrence shift: an independent route to ln Γ.
    fn ln_gamma_stirling(x: f64) -> f64 {
        let mut shift = 0.0;
        let mut z = x;
        while z < 20.0 {
            shift -= z.ln();
            z += 1.0;
        }
        let z2 = z * z;
        let series = 1.0 / (12.0 * z) - 1.0 / (360.0 * z * z2) + 1.0 / (1260.0 * z2 * z2 * z)
            - 1.0 / (1680.0 * z2 * z2 * z2 * z)
            + 1.0 / (1188.0 * z2 * z2 * z2 * z2 * z);
        shift + (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series
    }

    #[test]
    fn upper_gamma_closed_forms() {
        for y in [0.0f64, 0.3, 1.0, 4.5, 60.0, 400.0] {
            let g1 = -y;
            let g2 = (1.0 + y).ln() - y;
            let g3 = (y * y + 2.0 * y + 2.0).ln() - y;
            assert!((ln_upper_gamma(1.0, y).unwrap() - g1).abs() < 1e-11, "s=1, y={y}");
            assert!((ln_upper_gamma(2.0, y).unwrap() - g2).abs() < 1e-11, "s=2, y={y}");
            assert!((ln_upper_gamma(3.0, y).unwrap() - g3).abs() < 1e-11, "s=3, y={y}");
        }
        // Γ(1/2, y) = √π erfc(√y); mpmath: erfc(2) = 0.004677734981047265838.
        let v = ln_upper_gamma(0.5, 4.0).unwrap();
        assert!((v - (PI.sqrt() * 0.004_677_734_981_047_266).ln()).abs() < 1e-10);
        assert!((ln_upper_gamma(3.0, 0.0).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(ln_upper_gamma(0.0, 1.0).is_err());
    }

    #[test]
    fn known_values() {
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-15);
        assert!((gamma(1.0) - 1.0).abs() < 1e-15);
        assert!((gamma(5.0) - 24.0).abs() < 1e-12);
        // mpmath: Γ(2.375) = 1.22225615758980984352...
        assert!((gamma(2.375) / 1.222_256_157_589_809_8 - 1.0).abs() < 1e-14);
        assert!(gamma(0.0).is_nan());
        assert!(gamma(-2.0).is_nan());
        assert!((gamma(-0.5) + 2.0 * PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn matches_stirling_oracle_on_unit_range() {
        let mut x = 0.05;
        while x < 30.0 {
            let rel = (gamma(x) / ln_gamma_stirling(x).exp() - 1.0).abs();
            assert!(rel < 1e-12, "x = {x}, rel = {rel}");
            assert!((ln_gamma(x) - ln_gamma_stirling(x)).abs() < 1e-12 * (1.0 + ln_gamma(x).abs()));
            x += 0.173;
        }
    }

    #[test]
    fn temme_auxiliaries() {
        let (g1, g2, gp, gm) = temme_gammas(0.0);
        assert!((g1 + 0.577_215_664_901_532_9).abs() < 1e-14);
        assert!((g2 - 1.0).abs() < 1e-14);
        assert!((gp - 1.0).abs() < 1e-14 && (gm - 1.0).abs() < 1e-14);
        for mu in [-0.5, -0.31, 0.125, 0.375, 0.5] {
            let (g1, g2, gp, gm) = temme_gammas(mu);
            assert!((gp - 1.0 / gamma(1.0 + mu)).abs() < 1e-14, "mu = {mu}");
            assert!((gm - 1.0 / gamma(1.0 - mu)).abs() < 1e-14, "mu = {mu}");
            assert!((g2 - 0.5 * (gm + gp)).abs() < 1e-14);
            assert!((g1 - (gm - gp) / (2.0 * mu)).abs() < 1e-12);
        }
    }
}
