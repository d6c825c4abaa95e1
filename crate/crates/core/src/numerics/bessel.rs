//! Bessel functions `J_ν`, `Y_ν` of real order `ν >= 0` and positive argument.
//!
//! Steed's method: the continued fraction CF1 gives `J'_ν/J_ν`, a downward recurrence
//! moves the order into `|μ| <= 1/2`, and `Y_μ, Y_{μ+1}` come from Temme's series
//! (`x < 2`) or the complex continued fraction CF2 (`x >= 2`). The Wronskian then fixes
//! the scale of `J` and an upward recurrence returns `Y_ν`. The same code path serves
//! integer and non-integer orders, which is where the plain ascending series for `Y_ν`
//! breaks down.

use std::f64::consts::PI;

use crate::error::{HornError, Result};
use crate::numerics::gamma::{ln_gamma, temme_gammas};

const EPS: f64 = f64::EPSILON;
const FPMIN: f64 = 1e-300;
const MAXIT: usize = 100_000;
const XMIN: f64 = 2.0;

/// Values and derivatives of `J_ν` and `Y_ν` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BesselPair {
    pub j: f64,
    pub y: f64,
    pub jp: f64,
    pub yp: f64,
}

/// `J_ν(x)`, `Y_ν(x)` and their derivatives for `ν >= 0`, `x > 0`.
pub fn bessel_jy(nu: f64, x: f64) -> Result<BesselPair> {
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(HornError::domain(format!("Bessel order must be >= 0, got {nu}")));
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(HornError::domain(format!("Bessel argument must be > 0 here, got {x}")));
    }

    let nl = if x < XMIN {
        (nu + 0.5) as usize
    } else {
        ((nu - x + 1.5).max(0.0)) as usize
    };
    let xmu = nu - nl as f64;
    let xmu2 = xmu * xmu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;
    let w = xi2 / PI;

    // CF1 for f = J'_ν / J_ν.
    let mut isign = 1.0;
    let mut h = (nu * xi).max(FPMIN);
    let mut b = xi2 * nu;
    let mut d = 0.0;
    let mut c = h;
    let mut converged = false;
    for _ in 0..MAXIT {
        b += xi2;
        d = b - d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b - 1.0 / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = c * d;
        h *= del;
        if d < 0.0 {
            isign = -isign;
        }
        if (del - 1.0).abs() < EPS {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(HornError::Consistency(format!("Bessel CF1 did not converge at x = {x}")));
    }

    // Downward recurrence from ν to μ with unnormalised values.
    let mut rjl = isign * 1e-30;
    let mut rjpl = h * rjl;
    let rjl1 = rjl;
    let rjp1 = rjpl;
    let mut fact = nu * xi;
    for _ in 0..nl {
        let rjtemp = fact * rjl + rjpl;
        fact -= xi;
        rjpl = fact * rjtemp - rjl;
        rjl = rjtemp;
    }
    // The scale is formed from (J_μ, J'_μ) directly rather than from J'_μ/J_μ, which is
    // unbounded when x sits at a zero of J_μ.
    let nrm = rjl.abs().max(rjpl.abs());
    let (jm, jpm) = (rjl / nrm, rjpl / nrm);

    let (scale, mut rymu, mut ry1);
    if x < XMIN {
        let x2 = 0.5 * x;
        let pimu = PI * xmu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = xmu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(xmu);
        let mut ff = 2.0 / PI * fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let e = e.exp();
        let mut p = e / (gampl * PI);
        let mut q = 1.0 / (e * PI * gammi);
        let pimu2 = 0.5 * pimu;
        let fact3 = if pimu2.abs() < EPS { 1.0 } else { pimu2.sin() / pimu2 };
        let r = PI * pimu2 * fact3 * fact3;
        let mut c = 1.0;
        let d = -x2 * x2;
        let mut sum = ff + r * q;
        let mut sum1 = p;
        let mut ok = false;
        for i in 1..MAXIT {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - xmu2);
            c *= d / fi;
            p /= fi - xmu;
            q /= fi + xmu;
            let del = c * (ff + r * q);
            sum += del;
            let del1 = c * p - fi * del;
            sum1 += del1;
            if del.abs() < (1.0 + sum.abs()) * EPS {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(HornError::Consistency(format!("Temme series did not converge at x = {x}")));
        }
        rymu = -sum;
        ry1 = -sum1 * xi2;
        let rymup = xmu * xi * rymu - ry1;
        scale = w / (jm * rymup - jpm * rymu) / nrm;
    } else {
        // CF2: p + iq = (J'_μ + iY'_μ) / (J_μ + iY_μ).
        let mut a = 0.25 - xmu2;
        let mut p = -0.5 * xi;
        let mut q = 1.0;
        let br = 2.0 * x;
        let mut bi = 2.0;
        let mut fact = a * xi / (p * p + q * q);
        let mut cr = br + q * fact;
        let mut ci = bi + p * fact;
        let mut den = br * br + bi * bi;
        let mut dr = br / den;
        let mut di = -bi / den;
        let mut dlr = cr * dr - ci * di;
        let mut dli = cr * di + ci * dr;
        let mut temp = p * dlr - q * dli;
        q = p * dli + q * dlr;
        p = temp;
        let mut ok = false;
        for i in 2..MAXIT {
            a += 2.0 * (i as f64 - 1.0);
            bi += 2.0;
            dr = a * dr + br;
            di = a * di + bi;
            if dr.abs() + di.abs() < FPMIN {
                dr = FPMIN;
            }
            fact = a / (cr * cr + ci * ci);
            cr = br + cr * fact;
            ci = bi - ci * fact;
            if cr.abs() + ci.abs() < FPMIN {
                cr = FPMIN;
            }
            den = dr * dr + di * di;
            dr /= den;
            di /= -den;
            dlr = cr * dr - ci * di;
            dli = cr * di + ci * dr;
            temp = p * dlr - q * dli;
            q = p * dli + q * dlr;
            p = temp;
            if (dlr - 1.0).abs() + dli.abs() < EPS {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(HornError::Consistency(format!("Bessel CF2 did not converge at x = {x}")));
        }
        // J + iY = s (J_μ, J'_μ) with Y = (p J - J')/q and Y' = p Y + q J.
        let (a, b) = (p * jm - jpm, q * jm);
        let s = (w * q / (a * a + b * b)).sqrt();
        rymu = s * a / q;
        let rymup = p * rymu + q * s * jm;
        ry1 = xmu * xi * rymu - rymup;
        scale = s / nrm;
    }

    let j = rjl1 * scale;
    let jp = rjp1 * scale;
    for i in 1..=nl {
        let rytemp = (xmu + i as f64) * xi2 * ry1 - rymu;
        rymu = ry1;
        ry1 = rytemp;
    }
    let y = rymu;
    let yp = nu * xi * rymu - ry1;
    Ok(BesselPair { j, y, jp, yp })
}

/// `J_ν(x)` for `ν >= 0`, `x >= 0`.
///
/// Accurate to about `1e-13` relative for `ν <= 20`, `x <= 100` away from zeros;
/// outside that range the result is still computed but not held to that contract.
pub fn bessel_j(nu: f64, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(HornError::domain(format!("Bessel argument must be >= 0, got {x}")));
    }
    if x == 0.0 {
        if !(nu >= 0.0) {
            return Err(HornError::domain(format!("Bessel order must be >= 0, got {nu}")));
        }
        return Ok(if nu == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(bessel_jy(nu, x)?.j)
}

/// `Y_ν(x)` for `ν >= 0`, `x > 0`; `x = 0` is the pole and an error.
pub fn bessel_y(nu: f64, x: f64) -> Result<f64> {
    Ok(bessel_jy(nu, x)?.y)
}

/// `ln(J_ν(x) / x^ν)` limit data: `J_ν(x) ~ (x/2)^ν / Γ(ν+1)` as `x → 0`.
pub fn ln_small_argument_j(nu: f64, x: f64) -> f64 {
    nu * (0.5 * x).ln() - ln_gamma(nu + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson rule, used only by the integral-representation oracle.
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + k as f64 * h);
        }
        s * h / 3.0
    }

    fn tail_end(nu: f64, x: f64) -> f64 {
        // smallest t with x sinh t - ν t > 60
        let mut t: f64 = 1.0;
        while x * t.sinh() - nu * t < 60.0 {
            t += 0.25;
        }
        t
    }

    /// Schläfli integral representations of `J_ν` and `Y_ν`.
    fn oracle(nu: f64, x: f64) -> (f64, f64) {
        let n = 40_000;
        let j1 = simpson(|th| (nu * th - x * th.sin()).cos(), 0.0, PI, n) / PI;
        let y1 = simpson(|th| (x * th.sin() - nu * th).sin(), 0.0, PI, n) / PI;
        let tm = tail_end(nu, x);
        let j2 = simpson(|t| (-x * t.sinh() - nu * t).exp(), 0.0, tm, n) * (nu * PI).sin() / PI;
        let y2 = simpson(
            |t| (nu * t - x * t.sinh()).exp() + (-nu * t - x * t.sinh()).exp() * (nu * PI).cos(),
            0.0,
            tm,
            n,
        ) / PI;
        (j1 - j2, y1 - y2)
    }

    #[test]
    fn special_values() {
        assert_eq!(bessel_j(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(2.5, 0.0).unwrap(), 0.0);
        let x = PI / 2.0;
        assert!((bessel_j(0.5, x).unwrap() - 2.0 / PI).abs() < 1e-12);
        assert!(bessel_y(0.5, x).unwrap().abs() < 1e-12);
        assert!((bessel_y(0.5, PI).unwrap() - 2f64.sqrt() / PI).abs() < 1e-12);
        assert!(bessel_j(0.0, 2.404_825_557_695_773).unwrap().abs() < 1e-10);
        let y = bessel_y(1.0, 1e-6).unwrap();
        assert!(y < -1e5, "Y_1(1e-6) = {y}");
        assert!(bessel_y(1.0, 0.0).is_err());
        assert!(bessel_j(-0.5, 1.0).is_err());
        assert!(bessel_j(1.0, -1.0).is_err());
    }

    #[test]
    fn half_integer_closed_forms() {
        for &x in &[0.1, 0.7, 1.9, 2.0, 3.3, 10.0, 27.5, 80.0] {
            let s = (2.0 / (PI * x)).sqrt();
            let j = bessel_jy(0.5, x).unwrap();
            assert!((j.j - s * x.sin()).abs() < 1e-12 * s, "x={x}");
            assert!((j.y + s * x.cos()).abs() < 1e-12 * s, "x={x}");
            let j32 = bessel_j(1.5, x).unwrap();
            assert!((j32 - s * (x.sin() / x - x.cos())).abs() < 1e-12 * s, "x={x}");
        }
    }

    #[test]
    fn recursion_onto_a_zero_of_the_base_order() {
        // x = (k + 1/2)π are zeros of J_{-1/2}, the base order reached from ν = 3/2, 5/2.
        for x in [0.5 * PI, 1.5 * PI] {
            let s = (2.0 / (PI * x)).sqrt();
            let b = bessel_jy(1.5, x).unwrap();
            assert!((b.j - s * (x.sin() / x - x.cos())).abs() < 1e-12 * s, "J x={x}: {}", b.j);
            assert!((b.y + s * (x.cos() / x + x.sin())).abs() < 1e-12 * s, "Y x={x}: {}", b.y);
            let j52 = s * ((3.0 / (x * x) - 1.0) * x.sin() - 3.0 * x.cos() / x);
            assert!((bessel_j(2.5, x).unwrap() - j52).abs() < 1e-12 * s, "J_5/2 x={x}");
        }
    }

    #[test]
    fn matches_integral_oracle() {
        for &nu in &[0.0, 0.5, 1.0, 1.375, 2.25, 5.0, 9.7] {
            for &x in &[0.1, 0.9, 1.99, 2.01, 4.5, 11.0, 37.0] {
                let (jo, yo) = oracle(nu, x);
                let b = bessel_jy(nu, x).unwrap();
                let sj = jo.abs().max(1e-3 * (2.0 / (PI * x)).sqrt());
                let sy = yo.abs().max(1e-3 * (2.0 / (PI * x)).sqrt());
                assert!((b.j - jo).abs() < 1e-10 * sj, "J nu={nu} x={x}: {} vs {jo}", b.j);
                assert!((b.y - yo).abs() < 1e-10 * sy, "Y nu={nu} x={x}: {} vs {yo}", b.y);
            }
        }
    }

    #[test]
    fn frozen_reference_values() {
        // mpmath, 30 digits
        let cases = [
            (0.0, 1.0, 0.765_197_686_557_966_6, 0.088_256_964_215_676_96),
            (1.375, 2.5, 0.530_984_206_974_935_4, -0.071_422_811_515_660_95),
            (5.0, 1.0, 2.497_577_302_112_344e-4, -260.405_866_625_812_2),
            (1.375, 60.0, 0.089_413_461_472_743_57, 0.051_166_199_628_363_73),
        ];
        for (nu, x, j, y) in cases {
            let b = bessel_jy(nu, x).unwrap();
            assert!((b.j / j - 1.0).abs() < 1e-11, "J_{nu}({x}) = {}", b.j);
            assert!((b.y / y - 1.0).abs() < 1e-9, "Y_{nu}({x}) = {}", b.y);
        }
    }

    #[test]
    fn wronskian_and_recurrence() {
        for &nu in &[0.0, 0.5, 1.375, 5.0] {
            for k in 0..=60 {
                let x = 0.1 * (500.0f64).powf(k as f64 / 60.0);
                let b = bessel_jy(nu, x).unwrap();
                let w = b.j * b.yp - b.jp * b.y;
                let exact = 2.0 / (PI * x);
                assert!((w / exact - 1.0).abs() < 1e-8, "Wronskian nu={nu} x={x}: {w}");
                if nu >= 1.0 {
                    let lo = bessel_j(nu - 1.0, x).unwrap();
                    let hi = bessel_j(nu + 1.0, x).unwrap();
                    let rhs = 2.0 * nu / x * b.j;
                    let scale = lo.abs().max(hi.abs()).max(rhs.abs());
                    assert!((lo + hi - rhs).abs() < 1e-8 * scale, "recurrence nu={nu} x={x}");
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn recurrence_holds_for_random_orders(nu in 1.0f64..6.0, x in 0.1f64..50.0) {
            let lo = bessel_jy(nu - 1.0, x).unwrap();
            let mid = bessel_jy(nu, x).unwrap();
            let hi = bessel_jy(nu + 1.0, x).unwrap();
            let sj = lo.j.abs().max(hi.j.abs()).max(mid.j.abs() * 2.0 * nu / x);
            let sy = lo.y.abs().max(hi.y.abs()).max(mid.y.abs() * 2.0 * nu / x);
            proptest::prop_assert!((lo.j + hi.j - 2.0 * nu / x * mid.j).abs() <= 1e-8 * sj);
            proptest::prop_assert!((lo.y + hi.y - 2.0 * nu / x * mid.y).abs() <= 1e-8 * sy);
            // J'_ν = J_{ν-1} - (ν/x) J_ν
            proptest::prop_assert!((mid.jp - (lo.j - nu / x * mid.j)).abs() <= 1e-8 * sj);
        }
    }

    #[test]
    fn small_argument_limit() {
        let nu = 1.375;
        let x = 1e-5;
        let j = bessel_j(nu, x).unwrap();
        assert!((j.ln() - ln_small_argument_j(nu, x)).abs() < 1e-9);
    }
}
