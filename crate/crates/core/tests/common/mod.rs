//! Quadrature used by the oracles: fixed Gauss–Legendre rules composed over panels,
//! independent of the adaptive integrator in the library.

#![allow(dead_code)]

use std::f64::consts::PI;

use hornlab::HornParams;

/// `2^{1-n} r^c` with `c = (n-1)(1+ε) + (N-n)(1-η)` assembled from the raw parameters.
pub fn weight(p: &HornParams, r: f64) -> f64 {
    let n = p.n() as f64;
    let c = (n - 1.0) * (1.0 + p.eps()) + (p.big_n() - n) * (1.0 - p.eta());
    2.0f64.powf(1.0 - n) * r.powf(c)
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    for k in 0..n {
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for m in 2..=n {
                let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    rule
}

/// Composite rule: `panels` abutting intervals between the given breaks, each with the
/// `n`-point rule.
pub fn composite(breaks: &[f64], n: usize) -> Vec<(f64, f64)> {
    let base = gauss_legendre(n);
    let mut out = Vec::new();
    for w in breaks.windows(2) {
        let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        out.extend(base.iter().map(|&(x, wt)| (mid + half * x, half * wt)));
    }
    out
}

/// `count + 1` breaks from `a` to `b`, geometric when `a > 0`.
pub fn breaks(a: f64, b: f64, count: usize) -> Vec<f64> {
    (0..=count)
        .map(|k| {
            let t = k as f64 / count as f64;
            if a > 0.0 {
                a * (b / a).powf(t)
            } else {
                a + (b - a) * t
            }
        })
        .collect()
}

/// Unit-norm zonal spherical harmonics on `S²`: `φ_0 = 1/√(4π)`, `φ_1 = √(3/(4π)) cos θ`,
/// with their `θ` derivatives.
pub fn zonal(i: u32, theta: f64) -> (f64, f64) {
    match i {
        0 => (1.0 / (4.0 * PI).sqrt(), 0.0),
        1 => {
            let a = (3.0 / (4.0 * PI)).sqrt();
            (a * theta.cos(), -a * theta.sin())
        }
        _ => panic!("only i = 0, 1 are tabulated"),
    }
}

/// `∫_{S²} F(θ) dσ` by a product rule in `(θ, ϕ)`.
pub fn sphere_integral<F: Fn(f64) -> f64>(f: F) -> f64 {
    let theta = composite(&[0.0, PI], 24);
    let phi = composite(&breaks(0.0, 2.0 * PI, 4), 8);
    let mut total = 0.0;
    for &(t, wt) in &theta {
        let ft = f(t) * t.sin();
        for &(_, wp) in &phi {
            total += wt * wp * ft;
        }
    }
    total
}

/// `∫_a^b ∫_{S²} F(ρ, θ) dσ dρ` by a product rule in `(ρ, θ, ϕ)`.
pub fn shell_integral<F: Fn(f64, f64) -> f64>(a: f64, b: f64, panels: usize, f: F) -> f64 {
    let radial = composite(&breaks(a, b, panels), 20);
    radial.iter().map(|&(r, wr)| wr * sphere_integral(|t| f(r, t))).sum()
}
