//! Signed log-magnitude numbers for quantities that under- or overflow `f64`.

use std::ops::{Mul, Neg};

/// A real number stored as `sign · exp(ln_abs)`; zero has sign 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedLog {
    pub sign: f64,
    pub ln_abs: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog { sign: 0.0, ln_abs: f64::NEG_INFINITY };

    pub fn new(sign: f64, ln_abs: f64) -> Self {
        if sign == 0.0 || ln_abs == f64::NEG_INFINITY {
            SignedLog::ZERO
        } else {
            SignedLog { sign: sign.signum(), ln_abs }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            SignedLog::ZERO
        } else {
            SignedLog { sign: x.signum(), ln_abs: x.abs().ln() }
        }
    }

    pub fn to_f64(self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.ln_abs.exp()
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0.0
    }

    pub fn scale_ln(self, ln_factor: f64) -> Self {
        SignedLog::new(self.sign, self.ln_abs + ln_factor)
    }

    /// Signed sum of all terms, evaluated around the largest magnitude.
    pub fn sum<I: IntoIterator<Item = SignedLog>>(terms: I) -> SignedLog {
        let terms: Vec<SignedLog> = terms.into_iter().filter(|t| !t.is_zero()).collect();
        let peak = terms.iter().map(|t| t.ln_abs).fold(f64::NEG_INFINITY, f64::max);
        if peak == f64::NEG_INFINITY {
            return SignedLog::ZERO;
        }
        let acc: f64 = terms.iter().map(|t| t.sign * (t.ln_abs - peak).exp()).sum();
        SignedLog::from_f64(acc).scale_ln(peak)
    }
}

impl Mul for SignedLog {
    type Output = SignedLog;
    fn mul(self, rhs: SignedLog) -> SignedLog {
        SignedLog::new(self.sign * rhs.sign, self.ln_abs + rhs.ln_abs)
    }
}

impl Neg for SignedLog {
    type Output = SignedLog;
    fn neg(self) -> SignedLog {
        SignedLog { sign: -self.sign, ln_abs: self.ln_abs }
    }
}

/// `ln Σ exp(x_i)` for finite or `-∞` entries.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let peak = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return peak;
    }
    peak + xs.iter().map(|x| (x - peak).exp()).sum::<f64>().ln()
}
