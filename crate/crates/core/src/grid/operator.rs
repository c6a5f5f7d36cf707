use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::Mesh;
use crate::error::{LabError, Result};

/// How an operator came to be. Sabotaged operators deliberately break an
/// invariant so that diagnostics can be tested for detection power.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Provenance {
    Assembled,
    Sabotaged(String),
}

/// Symmetric sparse matrix in compressed-row form. Within a row, columns are
/// strictly increasing.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    size: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    mesh: Mesh,
    epsilon: f64,
    provenance: Provenance,
    bounds: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkovReport {
    pub symmetric: bool,
    pub max_row_sum: f64,
    pub max_positive_offdiag: f64,
    /// Smallest of the sampled `φᵀAφ / ‖φ‖²`.
    pub min_rayleigh: f64,
    pub norm_inf: f64,
    pub samples: usize,
}

impl MarkovReport {
    pub fn holds(&self) -> bool {
        self.symmetric
            && self.max_row_sum <= 1e-13 * self.norm_inf
            && self.max_positive_offdiag <= 0.0
            && self.min_rayleigh >= -1e-10 * self.norm_inf
    }
}

impl DiscreteOperator {
    /// Builds `Σ_faces g (e_i − e_j)(e_i − e_j)ᵀ` from `(i, j, g)` triples.
    pub(crate) fn from_faces<I: IntoIterator<Item = (usize, usize, f64)>>(mesh: Mesh, epsilon: f64, faces: I) -> Self {
        let size = mesh.len();
        let mut rows: Vec<Vec<(usize, f64)>> = (0..size).map(|i| vec![(i, 0.0)]).collect();
        for (i, j, g) in faces {
            rows[i][0].1 += g;
            rows[j][0].1 += g;
            rows[i].push((j, -g));
            rows[j].push((i, -g));
        }
        Self::from_rows(mesh, epsilon, rows, Provenance::Assembled)
    }

    fn from_rows(mesh: Mesh, epsilon: f64, mut rows: Vec<Vec<(usize, f64)>>, provenance: Provenance) -> Self {
        let size = rows.len();
        let mut row_ptr = Vec::with_capacity(size + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows.iter_mut() {
            row.sort_by_key(|e| e.0);
            for &(j, v) in row.iter() {
                match cols.last() {
                    Some(&last) if last == j && cols.len() > *row_ptr.last().unwrap() => {
                        *vals.last_mut().unwrap() += v;
                    }
                    _ => {
                        cols.push(j);
                        vals.push(v);
                    }
                }
            }
            row_ptr.push(cols.len());
        }
        let mut op = DiscreteOperator { size, row_ptr, cols, vals, mesh, epsilon, provenance, bounds: (0.0, 0.0) };
        op.bounds = op.gershgorin();
        op
    }

    fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.size {
            let mut diag = 0.0;
            let mut radius = 0.0;
            for (j, v) in self.row(i) {
                if j == i {
                    diag = v;
                } else {
                    radius += v.abs();
                }
            }
            lo = lo.min(diag - radius);
            hi = hi.max(diag + radius);
        }
        (lo, hi)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Gershgorin upper bound on the spectrum.
    pub fn spectral_norm_bound(&self) -> f64 {
        self.bounds.1.max(self.bounds.0.abs())
    }

    /// Gershgorin enclosure `[lo, hi]` of the spectrum.
    pub fn spectrum_bounds(&self) -> (f64, f64) {
        self.bounds
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[s..e].iter().copied().zip(self.vals[s..e].iter().copied())
    }

    /// Stored entries as `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.size).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.cols[s..e].binary_search(&j) {
            Ok(k) => self.vals[s + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.size).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.size) {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = 0.0;
            for k in s..e {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.size];
        self.apply(x, &mut y);
        y
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        (0..self.size).map(|i| x[i] * self.row(i).map(|(j, v)| v * x[j]).sum::<f64>()).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.size).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.size).map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Sub-, main and super-diagonal when the matrix is tridiagonal.
    pub fn tridiagonal(&self) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        if self.entries().any(|(i, j, _)| i.abs_diff(j) > 1) {
            return None;
        }
        let n = self.size;
        let lower = (1..n).map(|i| self.get(i, i - 1)).collect();
        let upper = (0..n - 1).map(|i| self.get(i, i + 1)).collect();
        Some((lower, self.diagonal(), upper))
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.size, self.size);
        for (i, j, v) in self.entries() {
            m[(i, j)] = v;
        }
        m
    }

    /// Invariant diagnostics over all rows and 32 seeded Rayleigh quotients.
    pub fn markov_check(&self, seed: u64) -> MarkovReport {
        let mut symmetric = true;
        let mut max_pos: f64 = 0.0;
        for (i, j, v) in self.entries() {
            if i != j {
                if self.get(j, i) != v {
                    symmetric = false;
                }
                max_pos = max_pos.max(v);
            }
        }
        let max_row_sum = self.row_sums().iter().fold(0.0_f64, |m, s| m.max(s.abs()));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = 32;
        let mut min_rayleigh = f64::INFINITY;
        for _ in 0..samples {
            let phi: Vec<f64> = (0..self.size).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm2: f64 = phi.iter().map(|v| v * v).sum();
            min_rayleigh = min_rayleigh.min(self.quadratic_form(&phi) / norm2);
        }
        MarkovReport {
            symmetric,
            max_row_sum,
            max_positive_offdiag: max_pos,
            min_rayleigh,
            norm_inf: self.norm_inf(),
            samples,
        }
    }

    /// Writes `row,col,value` for every stored entry.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        w.write_record(["row", "col", "value"])?;
        for (i, j, v) in self.entries() {
            w.serialize((i, j, v))?;
        }
        w.flush().map_err(|e| LabError::io(path, e))?;
        Ok(())
    }

    fn rows_vec(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.size).map(|i| self.row(i).collect()).collect()
    }

    /// Adds `delta` to `A[i][i]`, so row `i` no longer sums to zero.
    pub fn sabotage_row_sum(&self, i: usize, delta: f64) -> Self {
        let mut rows = self.rows_vec();
        rows[i].push((i, delta));
        let why = format!("row {i} sum perturbed by {delta:e}");
        Self::from_rows(self.mesh.clone(), self.epsilon, rows, Provenance::Sabotaged(why))
    }

    /// Injects a symmetric positive off-diagonal pair `A[i][j] = A[j][i] += v`
    /// and lowers both diagonals by `v`, keeping row sums at zero.
    pub fn sabotage_positive_offdiag(&self, i: usize, j: usize, v: f64) -> Self {
        let mut rows = self.rows_vec();
        rows[i].push((j, v));
        rows[j].push((i, v));
        rows[i].push((i, -v));
        rows[j].push((j, -v));
        let why = format!("positive off-diagonal {v:e} injected at ({i}, {j})");
        Self::from_rows(self.mesh.clone(), self.epsilon, rows, Provenance::Sabotaged(why))
    }
}

pub(crate) fn csv_io(path: &Path, e: csv::Error) -> LabError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => LabError::io(path, io),
        other => LabError::Validation(format!("{}: {other:?}", path.display())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::CoefficientProfile;
    use crate::grid::assemble;

    fn laplacian(n: usize) -> DiscreteOperator {
        let p = CoefficientProfile::laplacian(1, vec![[0.0, 1.0]]).unwrap();
        assemble(&p, &Mesh::interval(0.0, 1.0, n).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn assembled_laplacian_is_markov() {
        let a = laplacian(64);
        let r = a.markov_check(1);
        assert!(r.symmetric);
        assert_eq!(r.max_positive_offdiag, 0.0);
        assert!(r.max_row_sum <= 1e-13 * r.norm_inf);
        assert!(r.holds());
        // Dense oracle: the smallest eigenvalue is 0.
        let eig = nalgebra::SymmetricEigen::new(a.to_dense());
        let lmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(lmin.abs() <= 1e-10 * r.norm_inf);
        assert!(r.min_rayleigh >= lmin - 1e-10 * r.norm_inf);
        let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        assert!(a.spectral_norm_bound() >= lmax);
    }

    #[test]
    fn sabotage_is_visible() {
        let a = laplacian(16);
        let r = a.sabotage_row_sum(3, 1e-3).markov_check(1);
        assert!(!r.holds() && r.max_row_sum >= 1e-3 * 0.999);
        let r = a.sabotage_positive_offdiag(2, 9, 5.0).markov_check(1);
        assert!(!r.holds() && r.max_positive_offdiag == 5.0);
        assert!(r.max_row_sum <= 1e-13 * r.norm_inf);
    }

    #[test]
    fn tridiagonal_extraction_and_export() {
        let a = laplacian(8);
        let (lo, d, up) = a.tridiagonal().unwrap();
        assert_eq!((lo.len(), d.len(), up.len()), (8, 9, 8));
        assert_eq!(lo, up);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        a.export_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("row,col,value\n0,0,64"));
        assert_eq!(text.lines().count(), 1 + a.nnz());
    }
}
