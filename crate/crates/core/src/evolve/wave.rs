use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grid::DiscreteOperator;

/// Leapfrog approximation of `cos(t A^{1/2}) φ₀`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveField {
    pub displacement: Vec<f64>,
    /// Displacement one step earlier.
    pub previous: Vec<f64>,
    pub time: f64,
    pub dt: f64,
    pub steps: usize,
    /// Largest relative change of the discrete energy over the run.
    pub energy_drift: f64,
}

/// Leapfrog `u^{k+1} = 2u^k − u^{k−1} − dt² A u^k` from `u⁻¹ = u¹`, with
/// `dt ≤ cfl_safety · 2 / √λ_max` shortened so that whole steps reach `t`.
pub fn wave_evolve(a: &DiscreteOperator, phi0: &[f64], t: f64, cfl_safety: f64) -> Result<WaveField> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(LabError::arg(format!("time must be finite and nonnegative, got {t}")));
    }
    if !(cfl_safety > 0.0 && cfl_safety <= 1.0) {
        return Err(LabError::arg(format!("cfl_safety must lie in (0, 1], got {cfl_safety}")));
    }
    if phi0.len() != a.size() {
        return Err(LabError::arg("initial datum length does not match the operator"));
    }
    let lambda = a.spectrum_bounds().1.max(0.0);
    if t == 0.0 || lambda == 0.0 {
        return Ok(WaveField {
            displacement: phi0.to_vec(),
            previous: phi0.to_vec(),
            time: t,
            dt: 0.0,
            steps: 0,
            energy_drift: 0.0,
        });
    }
    let dt_max = cfl_safety * 2.0 / lambda.sqrt();
    let steps = (t / dt_max).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let dt2 = dt * dt;
    let n = phi0.len();
    let norm0 = l2(phi0).max(f64::MIN_POSITIVE);

    let mut au = a.mul(phi0);
    let mut prev = phi0.to_vec();
    let mut cur: Vec<f64> = (0..n).map(|i| phi0[i] - 0.5 * dt2 * au[i]).collect();
    // Conserved leapfrog energy: ‖(u¹ − u⁰)/dt‖² + (u¹)ᵀ A u⁰.
    let energy = |cur: &[f64], prev: &[f64], a_prev: &[f64]| -> f64 {
        let kinetic: f64 = cur.iter().zip(prev).map(|(c, p)| ((c - p) / dt).powi(2)).sum();
        let potential: f64 = cur.iter().zip(a_prev).map(|(c, ap)| c * ap).sum();
        kinetic + potential
    };
    let e0 = energy(&cur, &prev, &au);
    let scale = e0.abs().max(f64::MIN_POSITIVE);
    let mut drift: f64 = 0.0;
    let mut next = vec![0.0; n];
    for k in 1..steps {
        a.apply(&cur, &mut au);
        for i in 0..n {
            next[i] = 2.0 * cur[i] - prev[i] - dt2 * au[i];
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        // `au` now holds A applied to `prev`.
        drift = drift.max((energy(&cur, &prev, &au) - e0).abs() / scale);
        let growth = l2(&cur) / norm0;
        if !(growth <= 10.0) {
            return Err(LabError::Cfl { time: (k + 1) as f64 * dt, growth });
        }
    }
    Ok(WaveField { displacement: cur, previous: prev, time: t, dt, steps, energy_drift: drift })
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
