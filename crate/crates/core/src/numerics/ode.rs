//! Adaptive Dormand–Prince 5(4) integration with continuous output.
//!
//! Spans may run backward (`t1 < t0`). Every accepted step keeps its quartic
//! interpolation coefficients, so the solution can be evaluated anywhere on the span
//! with an error of the same order as the step tolerance.

use crate::error::{HornError, Result};

const C2: f64 = 0.2;
const C3: f64 = 0.3;
const C4: f64 = 0.8;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 0.2;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Step-control settings.
#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step magnitude; chosen automatically when `None`.
    pub h_init: Option<f64>,
    /// Largest step magnitude; unbounded when `None`.
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-12, h_init: None, h_max: None, max_steps: 2_000_000 }
    }
}

impl OdeOptions {
    pub fn with_tol(rtol: f64, atol: f64) -> Self {
        OdeOptions { rtol, atol, ..Default::default() }
    }
}

/// Solution of an initial value problem with continuous output on `[t0, t_end]`.
#[derive(Clone, Debug)]
pub struct DenseSolution {
    dim: usize,
    /// Step start times, in integration order.
    t: Vec<f64>,
    /// Signed step lengths.
    h: Vec<f64>,
    /// `5 * dim` interpolation coefficients per step.
    cont: Vec<f64>,
    t_end: f64,
    y_end: Vec<f64>,
    y0: Vec<f64>,
    /// False if an observer stopped the integration before the requested end.
    completed: bool,
}

impl DenseSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_start(&self) -> f64 {
        self.t.first().copied().unwrap_or(self.t_end)
    }

    /// Time actually reached; equals the requested end unless an observer stopped early.
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn y_end(&self) -> &[f64] {
        &self.y_end
    }

    pub fn completed(&self) -> bool {
        self.completed
    }

    /// Number of accepted steps.
    pub fn steps(&self) -> usize {
        self.t.len()
    }

    /// Accepted step start points followed by the end point.
    pub fn mesh(&self) -> Vec<f64> {
        let mut m = self.t.clone();
        m.push(self.t_end);
        m
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let (lo, hi) = if self.t_end >= self.t_start() {
            (self.t_start(), self.t_end)
        } else {
            (self.t_end, self.t_start())
        };
        let slack = 1e-12 * (hi - lo).abs().max(hi.abs().max(lo.abs()) * 1e-3);
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(HornError::domain(format!("t = {t} outside solution span [{lo}, {hi}]")));
        }
        if self.t.is_empty() {
            return Ok((usize::MAX, 0.0));
        }
        let forward = self.h[0] > 0.0;
        // Last step whose start is at or before t in the direction of integration.
        let idx = if forward {
            self.t.partition_point(|&s| s <= t)
        } else {
            self.t.partition_point(|&s| s >= t)
        };
        let i = idx.saturating_sub(1).min(self.t.len() - 1);
        let theta = ((t - self.t[i]) / self.h[i]).clamp(0.0, 1.0);
        Ok((i, theta))
    }

    /// Interpolated state at `t`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let (i, th) = self.locate(t)?;
        if i == usize::MAX {
            return Ok(self.y0.clone());
        }
        let c = &self.cont[5 * self.dim * i..5 * self.dim * (i + 1)];
        let d = self.dim;
        let th1 = 1.0 - th;
        Ok((0..d)
            .map(|k| {
                c[k] + th * (c[d + k] + th1 * (c[2 * d + k] + th * (c[3 * d + k] + th1 * c[4 * d + k])))
            })
            .collect())
    }

    /// Derivative of the interpolant at `t`.
    pub fn eval_derivative(&self, t: f64) -> Result<Vec<f64>> {
        let (i, th) = self.locate(t)?;
        if i == usize::MAX {
            return Ok(vec![0.0; self.dim]);
        }
        let c = &self.cont[5 * self.dim * i..5 * self.dim * (i + 1)];
        let d = self.dim;
        let h = self.h[i];
        let th1 = 1.0 - th;
        Ok((0..d)
            .map(|k| {
                let p = c[3 * d + k] + th1 * c[4 * d + k];
                let dp = -c[4 * d + k];
                let q = c[2 * d + k] + th * p;
                let dq = p + th * dp;
                let r = c[d + k] + th1 * q;
                let dr = -q + th1 * dq;
                (r + th * dr) / h
            })
            .collect())
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t1`.
pub fn integrate_ode<F>(f: F, t0: f64, y0: &[f64], t1: f64, opts: &OdeOptions) -> Result<DenseSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    integrate_ode_with(f, t0, y0, t1, opts, |_, _| true)
}

/// As [`integrate_ode`], calling `observer(t, y)` after every accepted step.
///
/// Integration stops after the first step for which the observer returns `false`.
pub fn integrate_ode_with<F, O>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t1: f64,
    opts: &OdeOptions,
    mut observer: O,
) -> Result<DenseSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]) -> bool,
{
    let d = y0.len();
    if !t0.is_finite() || !t1.is_finite() {
        return Err(HornError::domain(format!("integration span [{t0}, {t1}] must be finite")));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(HornError::Integration { at: t0, reason: "non-finite initial state".into() });
    }
    let mut sol = DenseSolution {
        dim: d,
        t: Vec::new(),
        h: Vec::new(),
        cont: Vec::new(),
        t_end: t0,
        y_end: y0.to_vec(),
        y0: y0.to_vec(),
        completed: true,
    };
    if t1 == t0 {
        return Ok(sol);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let h_max = opts.h_max.unwrap_or(span).min(span);

    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; d]; 7];
    let mut ytmp = vec![0.0; d];
    let mut ynew = vec![0.0; d];
    let mut t = t0;
    f(t, &y, &mut k[0]);

    let sc = |a: f64, b: f64| opts.atol + opts.rtol * a.abs().max(b.abs());
    let mut h = match opts.h_init {
        Some(h) => h.abs().min(h_max),
        None => {
            let d0 = rms((0..d).map(|i| y[i] / sc(y[i], y[i])));
            let d1 = rms((0..d).map(|i| k[0][i] / sc(y[i], y[i])));
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            h0.min(h_max).max(1e-12 * span)
        }
    };

    let mut steps = 0usize;
    let mut last_rejected = false;
    loop {
        if steps >= opts.max_steps {
            return Err(HornError::Integration { at: t, reason: "step budget exhausted".into() });
        }
        let remaining = (t1 - t).abs();
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        let hs = dir * h;

        for i in 0..d {
            ytmp[i] = y[i] + hs * A21 * k[0][i];
        }
        f(t + C2 * hs, &ytmp, &mut k[1]);
        for i in 0..d {
            ytmp[i] = y[i] + hs * (A31 * k[0][i] + A32 * k[1][i]);
        }
        f(t + C3 * hs, &ytmp, &mut k[2]);
        for i in 0..d {
            ytmp[i] = y[i] + hs * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
        }
        f(t + C4 * hs, &ytmp, &mut k[3]);
        for i in 0..d {
            ytmp[i] = y[i] + hs * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
        }
        f(t + C5 * hs, &ytmp, &mut k[4]);
        for i in 0..d {
            ytmp[i] = y[i]
                + hs * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
        }
        f(t + hs, &ytmp, &mut k[5]);
        for i in 0..d {
            ynew[i] = y[i]
                + hs * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
        }
        f(t + hs, &ynew, &mut k[6]);

        let err = rms((0..d).map(|i| {
            let e = hs
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            e / sc(y[i], ynew[i])
        }));
        steps += 1;

        if !err.is_finite() {
            h *= 0.1;
            last_rejected = true;
            if h < 1e-14 * t.abs().max(span) {
                return Err(HornError::Integration { at: t, reason: "non-finite derivative".into() });
            }
            continue;
        }

        let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 10.0);
        if err <= 1.0 {
            let base = sol.cont.len();
            sol.cont.resize(base + 5 * d, 0.0);
            let c = &mut sol.cont[base..];
            for i in 0..d {
                let dy = ynew[i] - y[i];
                let bspl = hs * k[0][i] - dy;
                c[i] = y[i];
                c[d + i] = dy;
                c[2 * d + i] = bspl;
                c[3 * d + i] = dy - hs * k[6][i] - bspl;
                c[4 * d + i] = hs
                    * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
            }
            sol.t.push(t);
            sol.h.push(hs);
            t = if last { t1 } else { t + hs };
            y.copy_from_slice(&ynew);
            let (k0, rest) = k.split_at_mut(1);
            k0[0].copy_from_slice(&rest[5]);
            sol.t_end = t;
            sol.y_end.copy_from_slice(&y);
            if !observer(t, &y) {
                sol.completed = last;
                return Ok(sol);
            }
            if last {
                return Ok(sol);
            }
            let grow = if last_rejected { fac.min(1.0) } else { fac };
            h = (h * grow).min(h_max);
            last_rejected = false;
        } else {
            h *= fac.min(1.0);
            last_rejected = true;
        }
        if h < 1e-15 * t.abs().max(1e-300) || h == 0.0 {
            return Err(HornError::Integration { at: t, reason: "step size underflow".into() });
        }
    }
}

fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in it {
        s += v * v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (s / n as f64).sqrt()
    }
}
