//! Dense symmetric eigendecompositions for small operators, optionally
//! memoized on disk under `DEGENLAB_CACHE`.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use sha2::{Digest, Sha256};

use crate::grid::DiscreteOperator;

/// Largest operator size handled by a dense eigendecomposition.
pub const DENSE_LIMIT: usize = 2048;

#[derive(Debug, Clone)]
pub struct DenseSpectrum {
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors as columns.
    pub vectors: DMatrix<f64>,
}

impl DenseSpectrum {
    pub fn compute(a: &DiscreteOperator) -> Self {
        let eig = SymmetricEigen::new(a.to_dense());
        DenseSpectrum { values: eig.eigenvalues, vectors: eig.eigenvectors }
    }

    /// As [`compute`](Self::compute), reusing a copy stored in the directory
    /// named by `DEGENLAB_CACHE` when one exists for the same matrix.
    pub fn cached(a: &DiscreteOperator) -> Self {
        let Some(dir) = std::env::var_os("DEGENLAB_CACHE").map(PathBuf::from) else {
            return Self::compute(a);
        };
        let path = dir.join(format!("eig-{}.bin", matrix_key(a)));
        if let Some(spec) = std::fs::read(&path).ok().and_then(|b| Self::decode(&b, a.size())) {
            return spec;
        }
        let spec = Self::compute(a);
        if std::fs::create_dir_all(&dir).is_ok() {
            // A failed write only costs a recomputation next time.
            let _ = std::fs::write(&path, spec.encode());
        }
        spec
    }

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * (self.values.len() + self.vectors.len()));
        for v in self.values.iter().chain(self.vectors.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    fn decode(bytes: &[u8], n: usize) -> Option<Self> {
        if bytes.len() != 8 * (n + n * n) {
            return None;
        }
        let mut it = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let values = DVector::from_iterator(n, it.by_ref().take(n));
        let vectors = DMatrix::from_iterator(n, n, it);
        Some(DenseSpectrum { values, vectors })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `f(A) v` for a spectral function `f`.
    pub fn apply_fn<F: Fn(f64) -> f64>(&self, f: F, v: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(v);
        let mut coeffs = self.vectors.tr_mul(&v);
        for (c, lam) in coeffs.iter_mut().zip(self.values.iter()) {
            *c *= f(*lam);
        }
        (&self.vectors * coeffs).as_slice().to_vec()
    }

    /// Diagonal of `f(A)`.
    pub fn diagonal_fn<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        let weights: Vec<f64> = self.values.iter().map(|l| f(*l)).collect();
        let n = self.len();
        (0..n)
            .map(|i| (0..n).map(|k| weights[k] * self.vectors[(i, k)].powi(2)).sum())
            .collect()
    }
}

fn matrix_key(a: &DiscreteOperator) -> String {
    let mut h = Sha256::new();
    h.update((a.size() as u64).to_le_bytes());
    for (i, j, v) in a.entries() {
        h.update((i as u64).to_le_bytes());
        h.update((j as u64).to_le_bytes());
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::CoefficientProfile;
    use crate::grid::{assemble, Mesh};

    #[test]
    fn encode_round_trip_and_key_stability() {
        let p = CoefficientProfile::laplacian(1, vec![[0.0, 1.0]]).unwrap();
        let a = assemble(&p, &Mesh::interval(0.0, 1.0, 16).unwrap(), 0.0).unwrap();
        let s = DenseSpectrum::compute(&a);
        let back = DenseSpectrum::decode(&s.encode(), a.size()).unwrap();
        assert_eq!(back.values, s.values);
        assert_eq!(back.vectors, s.vectors);
        assert_eq!(matrix_key(&a), matrix_key(&a.clone()));
        let b = assemble(&p, &Mesh::interval(0.0, 1.0, 16).unwrap(), 1e-3).unwrap();
        assert_ne!(matrix_key(&a), matrix_key(&b));
        // f = 1 reproduces the identity.
        let d = s.diagonal_fn(|_| 1.0);
        assert!(d.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }
}
