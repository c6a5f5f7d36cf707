use std::path::{Path, PathBuf};

use super::SymMat;
use crate::error::{LabError, Result};

/// Coefficient matrices sampled on a uniform grid spanning the profile
/// domain and interpolated (bi)linearly. Entries are stored with the first
/// axis varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    shape: Vec<usize>,
    entries: Vec<SymMat>,
    source: Option<PathBuf>,
}

impl SampledField {
    /// Builds a field, projecting eigenvalues in `[-1e-12 ‖C‖, 0)` to zero.
    /// Any entry with a more negative eigenvalue is rejected.
    pub fn new(shape: Vec<usize>, entries: Vec<SymMat>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 2 || shape.iter().any(|n| *n < 2) {
            return Err(LabError::Validation(format!("sampled grid shape {shape:?} needs 1 or 2 axes with at least 2 points")));
        }
        let count: usize = shape.iter().product();
        if entries.len() != count {
            return Err(LabError::Validation(format!("sampled grid {shape:?} needs {count} entries, got {}", entries.len())));
        }
        let dim = shape.len();
        if entries.iter().any(|m| m.dim != dim) {
            return Err(LabError::Validation("sampled entry dimension does not match the grid".into()));
        }
        if entries.iter().any(|m| !(m.a11.is_finite() && m.a12.is_finite() && m.a22.is_finite())) {
            return Err(LabError::Validation("sampled entries must be finite".into()));
        }
        let norm = entries.iter().map(|m| m.spectral_norm()).fold(0.0, f64::max);
        let floor = -1e-12 * norm;
        let mut projected = Vec::with_capacity(entries.len());
        for (k, m) in entries.into_iter().enumerate() {
            let (lo, _) = m.eigenvalues();
            if lo < floor {
                return Err(LabError::Validation(format!(
                    "sampled entry {k} is not positive semidefinite (smallest eigenvalue {lo:.3e})"
                )));
            }
            projected.push(if lo < 0.0 { project_psd(m) } else { m });
        }
        Ok(SampledField { shape, entries: projected, source: None })
    }

    /// Reads a CSV matrix file: one row per grid point, columns `c11` (1D) or
    /// `c11, c12, c22` (2D). A non-numeric first row is treated as a header.
    pub fn from_csv(path: &Path, shape: Vec<usize>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => LabError::io(path, io),
                other => LabError::Validation(format!("{}: {other:?}", path.display())),
            })?;
        let dim = shape.len();
        let mut entries = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
            let values = match parsed {
                Ok(v) => v,
                Err(_) if line == 0 => continue,
                Err(e) => return Err(LabError::Validation(format!("{} line {}: {e}", path.display(), line + 1))),
            };
            let m = match (dim, values.as_slice()) {
                (1, [c]) => SymMat { dim: 1, a11: *c, a12: 0.0, a22: 0.0 },
                (2, [a, b, c]) => SymMat { dim: 2, a11: *a, a12: *b, a22: *c },
                _ => {
                    return Err(LabError::Validation(format!(
                        "{} line {}: expected {} columns, got {}",
                        path.display(),
                        line + 1,
                        if dim == 1 { 1 } else { 3 },
                        values.len()
                    )))
                }
            };
            entries.push(m);
        }
        let mut field = Self::new(shape, entries)?;
        field.source = Some(path.to_path_buf());
        Ok(field)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn entries(&self) -> &[SymMat] {
        &self.entries
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    pub(super) fn validate(&self, dimension: usize, _domain: &[[f64; 2]]) -> Result<()> {
        if self.shape.len() != dimension {
            return Err(LabError::Validation(format!(
                "sampled grid has {} axes for a {dimension}-dimensional profile",
                self.shape.len()
            )));
        }
        Ok(())
    }

    pub fn is_scalar(&self) -> bool {
        self.entries.iter().all(SymMat::is_scalar)
    }

    pub fn has_cross_terms(&self) -> bool {
        self.entries.iter().any(SymMat::has_cross_term)
    }

    pub(super) fn interpolate(&self, x: &[f64], domain: &[[f64; 2]]) -> SymMat {
        let locate = |k: usize| -> (usize, f64) {
            let n = self.shape[k];
            let [a, b] = domain[k];
            let t = ((x[k] - a) / (b - a)).clamp(0.0, 1.0) * (n - 1) as f64;
            let i = (t.floor() as usize).min(n - 2);
            (i, t - i as f64)
        };
        let mix = |p: SymMat, q: SymMat, f: f64| SymMat {
            dim: p.dim,
            a11: p.a11 * (1.0 - f) + q.a11 * f,
            a12: p.a12 * (1.0 - f) + q.a12 * f,
            a22: p.a22 * (1.0 - f) + q.a22 * f,
        };
        if self.shape.len() == 1 {
            let (i, f) = locate(0);
            return mix(self.entries[i], self.entries[i + 1], f);
        }
        let nx = self.shape[0];
        let (i, fx) = locate(0);
        let (j, fy) = locate(1);
        let at = |i: usize, j: usize| self.entries[i + nx * j];
        let lower = mix(at(i, j), at(i + 1, j), fx);
        let upper = mix(at(i, j + 1), at(i + 1, j + 1), fx);
        // A convex combination of PSD matrices is PSD.
        mix(lower, upper, fy)
    }
}

fn project_psd(m: SymMat) -> SymMat {
    if m.dim == 1 {
        return SymMat { a11: m.a11.max(0.0), ..m };
    }
    let (lo, hi) = m.eigenvalues();
    let lo = lo.max(0.0);
    let hi = hi.max(0.0);
    // Eigenvector of the larger eigenvalue of [[a, b], [b, c]].
    let (a, b, c) = (m.a11, m.a12, m.a22);
    let theta = 0.5 * (2.0 * b).atan2(a - c);
    let (s, co) = theta.sin_cos();
    SymMat {
        dim: 2,
        a11: hi * co * co + lo * s * s,
        a12: (hi - lo) * co * s,
        a22: hi * s * s + lo * co * co,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{CoefficientProfile, Family};
    use std::io::Write;

    #[test]
    fn closed_form_eigenvalue_at_grid_points() {
        let entries = vec![
            SymMat { dim: 2, a11: 2.0, a12: 0.5, a22: 1.0 },
            SymMat { dim: 2, a11: 1.0, a12: 0.0, a22: 1.0 },
            SymMat { dim: 2, a11: 3.0, a12: -1.0, a22: 2.0 },
            SymMat { dim: 2, a11: 0.5, a12: 0.1, a22: 0.4 },
        ];
        let field = SampledField::new(vec![2, 2], entries.clone()).unwrap();
        let p = CoefficientProfile::new(2, Family::Sampled(field), vec![[0.0, 1.0], [0.0, 1.0]]).unwrap();
        for (k, x) in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]].iter().enumerate() {
            let m = entries[k];
            let tr = m.a11 + m.a22;
            let det = m.a11 * m.a22 - m.a12 * m.a12;
            let expected = tr / 2.0 - ((tr / 2.0).powi(2) - det).sqrt();
            let mu = p.smallest_eigenvalue(x).unwrap();
            assert!((mu - expected).abs() < 1e-12, "{mu} vs {expected}");
        }
    }

    #[test]
    fn tiny_negative_eigenvalues_are_projected() {
        let m = SymMat { dim: 2, a11: 1.0, a12: 1.0, a22: 1.0 - 1e-14 };
        let field = SampledField::new(vec![2], vec![SymMat { dim: 1, a11: -1e-13, a12: 0.0, a22: 0.0 }, SymMat::scalar(1, 1.0)]).unwrap();
        assert_eq!(field.entries()[0].a11, 0.0);
        let field2 = SampledField::new(vec![2, 2], vec![m; 4]).unwrap();
        assert!(field2.entries()[0].smallest_eigenvalue() >= -1e-15);
    }

    #[test]
    fn non_psd_entry_fails_at_construction() {
        let bad = SymMat { dim: 1, a11: -0.1, a12: 0.0, a22: 0.0 };
        let err = SampledField::new(vec![2], vec![bad, SymMat::scalar(1, 1.0)]).unwrap_err();
        assert!(matches!(err, LabError::Validation(_)));
    }

    #[test]
    fn csv_round_trip_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "c11").unwrap();
        for v in [1.0, 0.25, 0.0, 0.25, 1.0] {
            writeln!(f, "{v}").unwrap();
        }
        drop(f);
        let field = SampledField::from_csv(&path, vec![5]).unwrap();
        let p = CoefficientProfile::new(1, Family::Sampled(field), vec![[-1.0, 1.0]]).unwrap();
        assert_eq!(p.eval(&[0.0]).unwrap().a11, 0.0);
        assert!((p.eval(&[-0.25]).unwrap().a11 - 0.125).abs() < 1e-15);
    }
}
