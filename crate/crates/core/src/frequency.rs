//! Frequency scans shared by the elliptic and parabolic functionals.

use serde::{Deserialize, Serialize};

use crate::error::{HornError, Result};
use crate::numerics::LineFit;
use crate::output::{Cell, CsvTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanKind {
    Elliptic,
    Parabolic,
}

/// One row `(scale, I, E, U)` or `(scale, I, D, N)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrequencyRow {
    pub scale: f64,
    pub i: f64,
    /// `E(r)` for elliptic scans, `D(R)` for parabolic ones.
    pub energy: f64,
    /// `U = E/I` or `N = I/D`.
    pub ratio: f64,
}

/// Rows of a frequency scan, with strictly increasing scales and the ratio column
/// consistent with the other two to 1e-12 relative.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyScan {
    kind: ScanKind,
    rows: Vec<FrequencyRow>,
}

const RATIO_TOLERANCE: f64 = 1e-12;

impl FrequencyScan {
    pub fn new(kind: ScanKind, rows: Vec<FrequencyRow>) -> Result<Self> {
        if rows.windows(2).any(|w| !(w[1].scale > w[0].scale)) {
            return Err(HornError::Consistency("scan scales must be strictly increasing".into()));
        }
        for row in &rows {
            let expected = match kind {
                ScanKind::Elliptic => row.energy / row.i,
                ScanKind::Parabolic => row.i / row.energy,
            };
            if (row.ratio - expected).abs() > RATIO_TOLERANCE * expected.abs().max(f64::MIN_POSITIVE) {
                return Err(HornError::Consistency(format!(
                    "ratio column {} disagrees with {expected} at scale {}",
                    row.ratio, row.scale
                )));
            }
        }
        Ok(FrequencyScan { kind, rows })
    }

    pub fn kind(&self) -> ScanKind {
        self.kind
    }

    pub fn rows(&self) -> &[FrequencyRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn scales(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.scale).collect()
    }

    pub fn to_table(&self) -> CsvTable {
        let header: &[&str] = match self.kind {
            ScanKind::Elliptic => &["r", "I", "E", "U"],
            ScanKind::Parabolic => &["R", "I", "D", "N"],
        };
        let mut table = CsvTable::new(header);
        for r in &self.rows {
            table.push(vec![Cell::Real(r.scale), Cell::Real(r.i), Cell::Real(r.energy), Cell::Real(r.ratio)]);
        }
        table
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Log,
    Linear,
}

/// `points` increasing values from `lo` to `hi` inclusive.
pub fn make_grid(lo: f64, hi: f64, points: usize, spacing: Spacing) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(HornError::domain(format!("a grid needs at least 2 points, got {points}")));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(HornError::domain(format!("grid bounds must satisfy lo < hi, got [{lo}, {hi}]")));
    }
    if spacing == Spacing::Log && !(lo > 0.0) {
        return Err(HornError::domain(format!("log grid needs lo > 0, got {lo}")));
    }
    let m = (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points)
        .map(|k| {
            let t = k as f64 / m;
            match spacing {
                Spacing::Linear => lo + (hi - lo) * t,
                Spacing::Log => (lo.ln() + (hi / lo).ln() * t).exp(),
            }
        })
        .collect();
    grid[0] = lo;
    grid[points - 1] = hi;
    Ok(grid)
}

/// A line fit as written to reports; `residual` is the largest residual divided by the
/// range of the fitted data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitSummary {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

impl FitSummary {
    pub fn new(fit: &LineFit, ys: &[f64]) -> Self {
        let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        let residual = if range > 0.0 { fit.max_residual / range } else { 0.0 };
        FitSummary { slope: fit.slope, intercept: fit.intercept, residual }
    }
}

/// Lower-bound abscissa `1 - (scale/reference)^{-2ε}`.
pub(crate) fn lower_bound_abscissa(scales: &[f64], reference: f64, eps: f64) -> Vec<f64> {
    scales.iter().map(|s| 1.0 - (s / reference).powf(-2.0 * eps)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EllipticReport {
    pub identity_defect: f64,
    #[serde(rename = "U_C")]
    pub u_c: f64,
    #[serde(rename = "I_fit")]
    pub i_fit: FitSummary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParabolicReport {
    #[serde(rename = "ID_defect")]
    pub id_defect: f64,
    #[serde(rename = "N_C")]
    pub n_c: f64,
    #[serde(rename = "D_fit")]
    pub d_fit: FitSummary,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(scale: f64, i: f64, e: f64) -> FrequencyRow {
        FrequencyRow { scale, i, energy: e, ratio: e / i }
    }

    #[test]
    fn scan_invariants() {
        assert!(FrequencyScan::new(ScanKind::Elliptic, vec![row(0.1, 1.0, 2.0), row(0.2, 3.0, 1.0)]).is_ok());
        assert!(FrequencyScan::new(ScanKind::Elliptic, vec![row(0.2, 1.0, 2.0), row(0.1, 3.0, 1.0)]).is_err());
        let mut bad = row(0.1, 1.0, 2.0);
        bad.ratio *= 1.0 + 1e-9;
        assert!(FrequencyScan::new(ScanKind::Elliptic, vec![bad]).is_err());
        let par = FrequencyRow { scale: 0.1, i: 2.0, energy: 4.0, ratio: 0.5 };
        assert!(FrequencyScan::new(ScanKind::Parabolic, vec![par]).is_ok());
    }

    #[test]
    fn csv_headers() {
        let s = FrequencyScan::new(ScanKind::Parabolic, vec![]).unwrap();
        assert_eq!(s.to_table().render(), "R,I,D,N\n");
        let s = FrequencyScan::new(ScanKind::Elliptic, vec![row(1.0, 1.0, 0.0)]).unwrap();
        assert!(s.to_table().render().starts_with("r,I,E,U\n1.00000000000e0,"));
    }

    #[test]
    fn grids() {
        let g = make_grid(0.02, 0.13, 64, Spacing::Log).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g[0], 0.02);
        assert_eq!(g[63], 0.13);
        let ratios: Vec<f64> = g.windows(2).map(|w| w[1] / w[0]).collect();
        assert!(ratios.iter().all(|q| (q - ratios[0]).abs() < 1e-12));
        let l = make_grid(0.0, 1.0, 5, Spacing::Linear).unwrap();
        assert_eq!(l, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(make_grid(0.0, 1.0, 5, Spacing::Log).is_err());
        assert!(make_grid(1.0, 1.0, 5, Spacing::Linear).is_err());
    }

    #[test]
    fn report_field_names() {
        let fit = FitSummary { slope: 1.0, intercept: 0.0, residual: 0.0 };
        let v = serde_json::to_value(EllipticReport { identity_defect: 0.0, u_c: 1.0, i_fit: fit }).unwrap();
        assert!(v.get("U_C").is_some() && v["I_fit"].get("slope").is_some());
        let v = serde_json::to_value(ParabolicReport { id_defect: 0.0, n_c: 1.0, d_fit: fit }).unwrap();
        assert!(v.get("ID_defect").is_some() && v.get("N_C").is_some() && v.get("D_fit").is_some());
    }
}
