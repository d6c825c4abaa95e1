//! Globally adaptive Gauss–Kronrod (10/21) quadrature.
//!
//! The interval with the largest error estimate is bisected until the summed estimate
//! meets the tolerance. Error estimates use the usual Kronrod rescaling, which is
//! conservative for smooth integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{HornError, Result};

// Node and weight tables keep the digits they are published with.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600525452330,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

/// Gauss weights for the nodes `XGK[1], XGK[3], ..., XGK[9]`.
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { abs_tol: 1e-13, rel_tol: 1e-11, max_intervals: 4000 }
    }
}

impl QuadOptions {
    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        QuadOptions { abs_tol, rel_tol, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    /// Estimated absolute error.
    pub error: f64,
    pub evaluations: usize,
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let centr = 0.5 * (a + b);
    let hlgth = 0.5 * (b - a);
    let fc = f(centr);
    let mut resg = 0.0;
    let mut resk = WGK[10] * fc;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = hlgth * XGK[j];
        let f1 = f(centr - dx);
        let f2 = f(centr + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - reskh).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let result = resk * hlgth;
    resabs *= hlgth.abs();
    resasc *= hlgth.abs();
    let mut err = ((resk - resg) * hlgth).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (result, err)
}

/// `∫_a^b f` with absolute-or-relative error at most `tol`.
pub fn quad_adaptive<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadResult> {
    if !(tol > 0.0) {
        return Err(HornError::domain(format!("quadrature tolerance must be positive, got {tol}")));
    }
    quad_adaptive_with(f, a, b, &QuadOptions::with_tol(tol, tol))
}

/// `∫_a^b f` to `max(abs_tol, rel_tol |I|)`; fails if the interval budget runs out.
pub fn quad_adaptive_with<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    if !a.is_finite() || !b.is_finite() {
        return Err(HornError::domain(format!("quadrature limits [{a}, {b}] must be finite")));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let (v, e) = gk21(&mut f, a, b);
    let mut evals = 21;
    let mut total = v;
    let mut total_err = e;
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value: v, error: e });
    while total_err > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if !total.is_finite() || !total_err.is_finite() {
            return Err(HornError::Quadrature { estimate: total, error_bound: total_err });
        }
        if heap.len() >= opts.max_intervals {
            return Err(HornError::Quadrature { estimate: total, error_bound: total_err });
        }
        let p = heap.pop().expect("heap is never empty");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a.min(p.b) || m >= p.a.max(p.b) {
            return Err(HornError::Quadrature { estimate: total, error_bound: total_err });
        }
        let (v1, e1) = gk21(&mut f, p.a, m);
        let (v2, e2) = gk21(&mut f, m, p.b);
        evals += 42;
        total += v1 + v2 - p.value;
        total_err += e1 + e2 - p.error;
        heap.push(Piece { a: p.a, b: m, value: v1, error: e1 });
        heap.push(Piece { a: m, b: p.b, value: v2, error: e2 });
        if heap.len() % 64 == 0 {
            // Re-sum to stop drift in the running totals.
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
    total = heap.iter().map(|p| p.value).sum();
    total_err = heap.iter().map(|p| p.error).sum();
    Ok(QuadResult { value: total, error: total_err, evaluations: evals })
}

/// `∫_a^∞ f` through `x = a + L t/(1-t)`; `scale = L` should match the decay length.
pub fn quad_semi_infinite<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    scale: f64,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    if !(scale > 0.0) {
        return Err(HornError::domain(format!("semi-infinite map scale must be positive, got {scale}")));
    }
    quad_adaptive_with(
        |t| {
            let u = 1.0 - t;
            let x = a + scale * t / u;
            if !x.is_finite() {
                return 0.0;
            }
            let v = f(x) * scale / (u * u);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let k: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-15);
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn polynomial_exactness() {
        // Gauss 10-point is exact to degree 19, Kronrod 21-point to degree 31.
        for deg in 0..=31u32 {
            let mut f = |x: f64| x.powi(deg as i32);
            let (v, _) = gk21(&mut f, 0.0, 1.0);
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!((v - exact).abs() < 1e-14, "Kronrod degree {deg}: {v}");
            let mut g = 0.0;
            for j in 0..5 {
                let x = XGK[2 * j + 1];
                g += WG[j] * (f(0.5 + 0.5 * x) + f(0.5 - 0.5 * x));
            }
            g *= 0.5;
            if deg <= 19 {
                assert!((g - exact).abs() < 1e-14, "Gauss degree {deg}: {g}");
            }
        }
    }

    #[test]
    fn smooth_integrals() {
        let r = quad_adaptive(|x| x * x, 0.0, 1.0, 1e-13).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-14);
        let r = quad_adaptive(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-13).unwrap();
        assert!((r.value - 2.0).abs() < 1e-13);
        let r = quad_adaptive(|x| x.cos(), 1.0, 0.0, 1e-13).unwrap();
        assert!((r.value + 1f64.sin()).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        let r = quad_adaptive(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-11).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn semi_infinite_gamma_moment() {
        // ∫_0^∞ e^{-s²} s^{3.75} ds = Γ(2.375)/2.
        let opts = QuadOptions::with_tol(1e-14, 1e-12);
        let r = quad_semi_infinite(|s| (-s * s).exp() * s.powf(3.75), 0.0, 1.0, &opts).unwrap();
        assert!((r.value - 0.611_128_078_794_904_9).abs() < 1e-11, "{}", r.value);
    }

    #[test]
    fn error_estimate_is_honest() {
        type Case = (fn(f64) -> f64, f64, f64, f64);
        let cases: [Case; 3] = [
            (|x| (3.0 * x).exp(), 0.0, 2.0, ((6.0f64).exp() - 1.0) / 3.0),
            (|x| 1.0 / (1.0 + 25.0 * x * x), -1.0, 1.0, 0.4 * (5.0f64).atan()),
            (|x| x.sqrt(), 0.0, 4.0, 16.0 / 3.0),
        ];
        for (f, a, b, exact) in cases {
            let opts = QuadOptions::with_tol(1e-6, 0.0);
            let r = quad_adaptive_with(f, a, b, &opts).unwrap();
            assert!((r.value - exact).abs() <= r.error.max(1e-14), "{} vs {exact}, err {}", r.value, r.error);
        }
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let opts = QuadOptions { abs_tol: 0.0, rel_tol: 0.0, max_intervals: 8 };
        match quad_adaptive_with(|x| x.sqrt(), 0.0, 1.0, &opts) {
            Err(HornError::Quadrature { .. }) => {}
            other => panic!("expected budget error, got {other:?}"),
        }
    }
}
