//! Solves with `I + sA`: Thomas elimination for tridiagonal `A`, conjugate
//! gradients otherwise.

use crate::error::{LabError, Result};
use crate::grid::DiscreteOperator;

pub(crate) struct ShiftedSolver<'a> {
    a: &'a DiscreteOperator,
    s: f64,
    thomas: Option<Thomas>,
    cg_tol: f64,
    cg_cap: usize,
}

/// LU factors of a tridiagonal matrix without pivoting. Valid for the
/// diagonally dominant `I + sA`.
struct Thomas {
    lower: Vec<f64>,
    upper_mod: Vec<f64>,
    denom: Vec<f64>,
}

impl Thomas {
    fn factor(lower: Vec<f64>, diag: &[f64], upper: &[f64]) -> Self {
        let n = diag.len();
        let mut upper_mod = vec![0.0; n.saturating_sub(1)];
        let mut denom = vec![0.0; n];
        denom[0] = diag[0];
        for i in 1..n {
            upper_mod[i - 1] = upper[i - 1] / denom[i - 1];
            denom[i] = diag[i] - lower[i - 1] * upper_mod[i - 1];
        }
        Thomas { lower, upper_mod, denom }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut y = vec![0.0; n];
        y[0] = b[0] / self.denom[0];
        for i in 1..n {
            y[i] = (b[i] - self.lower[i - 1] * y[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            y[i] -= self.upper_mod[i] * y[i + 1];
        }
        y
    }
}

impl<'a> ShiftedSolver<'a> {
    pub(crate) fn new(a: &'a DiscreteOperator, s: f64) -> Self {
        let thomas = a.tridiagonal().map(|(lo, d, up)| {
            let diag: Vec<f64> = d.iter().map(|v| 1.0 + s * v).collect();
            let upper: Vec<f64> = up.iter().map(|v| s * v).collect();
            Thomas::factor(lo.iter().map(|v| s * v).collect(), &diag, &upper)
        });
        ShiftedSolver { a, s, thomas, cg_tol: 1e-10, cg_cap: 20_000 }
    }

    pub(crate) fn is_direct(&self) -> bool {
        self.thomas.is_some()
    }

    fn apply_shifted(&self, x: &[f64], y: &mut [f64]) {
        self.a.apply(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = xi + self.s * *yi;
        }
    }

    /// Normwise relative residual `‖Mx − b‖∞ / (‖M‖∞ ‖x‖∞ + ‖b‖∞)`.
    pub(crate) fn residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut r = vec![0.0; x.len()];
        self.apply_shifted(x, &mut r);
        let num = r.iter().zip(b).map(|(ri, bi)| (ri - bi).abs()).fold(0.0, f64::max);
        let norm_m = 1.0 + self.s * self.a.norm_inf();
        let den = norm_m * x.iter().fold(0.0_f64, |m, v| m.max(v.abs())) + b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match &self.thomas {
            Some(t) => Ok(t.solve(b)),
            None => self.cg(b),
        }
    }

    fn cg(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = b.len();
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut x = vec![0.0; n];
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let mut rr: f64 = r.iter().map(|v| v * v).sum();
        for it in 0..self.cg_cap {
            if rr.sqrt() <= self.cg_tol * bnorm {
                return Ok(x);
            }
            self.apply_shifted(&p, &mut ap);
            let alpha = rr / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rr_new: f64 = r.iter().map(|v| v * v).sum();
            let beta = rr_new / rr;
            rr = rr_new;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
            if it + 1 == self.cg_cap {
                break;
            }
        }
        Err(LabError::Solver { iterations: self.cg_cap, residual: rr.sqrt() / bnorm })
    }
}
