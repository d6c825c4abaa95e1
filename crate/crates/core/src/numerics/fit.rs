//! Ordinary least-squares line fits.

use crate::error::{HornError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual over the data.
    pub max_residual: f64,
}

impl LineFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Least-squares fit `y ≈ intercept + slope x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(HornError::DegenerateFit(format!("{} abscissae but {} ordinates", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(HornError::DegenerateFit(format!("need at least 2 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(HornError::DegenerateFit("non-finite data".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let spread = x.iter().fold(0.0f64, |m, v| m.max((v - mx).abs()));
    if sxx <= 1e-28 * n * (1.0 + mx * mx) || spread == 0.0 {
        return Err(HornError::DegenerateFit("abscissae have zero spread".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).abs()).fold(0.0, f64::max);
    Ok(LineFit { slope, intercept, max_residual })
}
