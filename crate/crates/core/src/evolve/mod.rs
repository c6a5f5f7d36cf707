//! Heat semigroup, resolvent powers, and the wave propagator of a
//! [`DiscreteOperator`].
//!
//! Fields are densities: mass is `Σ values · cell_volume`, and kernel columns
//! start from `1 / cell_volume` at the source.

mod chebyshev;
mod solve;
mod spectral;
mod wave;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use chebyshev::scaled_bessel;
pub use spectral::{DenseSpectrum, DENSE_LIMIT};
pub use wave::{wave_evolve, WaveField};

use crate::error::{LabError, Result};
use crate::grid::{DiscreteOperator, Mesh};
use solve::ShiftedSolver;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HeatBackend {
    #[default]
    ChebyshevExp,
    CrankNicolson {
        dt: f64,
    },
    BackwardEuler {
        dt: f64,
    },
}

/// Where the Chebyshev expansion takes the top of the spectrum from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumBound {
    #[default]
    Gershgorin,
    /// Power-iteration estimate, widened by 2% and capped by Gershgorin.
    PowerIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    /// Largest Chebyshev degree per step; longer times are substepped.
    pub degree_cap: usize,
    /// Bound on the discarded tail `2 Σ e^{-α} I_k(α)`.
    pub tail_tol: f64,
    pub spectrum: SpectrumBound,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig { degree_cap: 20_000, tail_tol: 1e-15, spectrum: SpectrumBound::Gershgorin }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatField {
    pub values: Vec<f64>,
    pub time: f64,
    pub source: Option<usize>,
}

impl HeatField {
    pub fn mass(&self, cell_volume: f64) -> f64 {
        self.values.iter().sum::<f64>() * cell_volume
    }

    /// Writes `x[,y],value` rows.
    pub fn export_csv(&self, mesh: &Mesh, path: &Path) -> Result<()> {
        write_field_csv(mesh, &self.values, "value", path)
    }
}

pub(crate) fn write_field_csv(mesh: &Mesh, values: &[f64], name: &str, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| crate::grid::csv_io(path, e))?;
    if mesh.dimension() == 1 {
        w.write_record(["x", name])?;
    } else {
        w.write_record(["x", "y", name])?;
    }
    for (i, v) in values.iter().enumerate() {
        let p = mesh.point(i);
        if mesh.dimension() == 1 {
            w.serialize((p[0], v))?;
        } else {
            w.serialize((p[0], p[1], v))?;
        }
    }
    w.flush().map_err(|e| LabError::io(path, e))
}

/// `e^{-tA} φ₀`.
pub fn heat_evolve(a: &DiscreteOperator, phi0: &[f64], t: f64, backend: HeatBackend) -> Result<HeatField> {
    heat_evolve_with(a, phi0, t, backend, &EvolveConfig::default())
}

pub fn heat_evolve_with(
    a: &DiscreteOperator,
    phi0: &[f64],
    t: f64,
    backend: HeatBackend,
    cfg: &EvolveConfig,
) -> Result<HeatField> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(LabError::arg(format!("time must be finite and nonnegative, got {t}")));
    }
    if phi0.len() != a.size() {
        return Err(LabError::arg(format!("initial datum has length {}, operator size {}", phi0.len(), a.size())));
    }
    if t == 0.0 {
        return Ok(HeatField { values: phi0.to_vec(), time: 0.0, source: None });
    }
    let values = match backend {
        HeatBackend::ChebyshevExp => chebyshev_action(a, phi0, t, cfg),
        HeatBackend::BackwardEuler { dt } => {
            let (steps, dt) = substeps(t, dt)?;
            let solver = ShiftedSolver::new(a, dt);
            let mut u = phi0.to_vec();
            for _ in 0..steps {
                u = solver.solve(&u)?;
            }
            u
        }
        HeatBackend::CrankNicolson { dt } => {
            let (steps, dt) = substeps(t, dt)?;
            let solver = ShiftedSolver::new(a, 0.5 * dt);
            let mut u = phi0.to_vec();
            let mut au = vec![0.0; u.len()];
            for _ in 0..steps {
                a.apply(&u, &mut au);
                let rhs: Vec<f64> = u.iter().zip(&au).map(|(x, y)| x - 0.5 * dt * y).collect();
                u = solver.solve(&rhs)?;
            }
            u
        }
    };
    Ok(HeatField { values, time: t, source: None })
}

fn substeps(t: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(LabError::arg(format!("time step must be positive, got {dt}")));
    }
    let steps = (t / dt).ceil().max(1.0) as usize;
    Ok((steps, t / steps as f64))
}

fn chebyshev_action(a: &DiscreteOperator, v: &[f64], t: f64, cfg: &EvolveConfig) -> Vec<f64> {
    let bounds = spectrum_bounds(a, cfg.spectrum);
    let full = chebyshev::scaled_bessel(0.5 * t * (bounds.1 - bounds.0), cfg.tail_tol).len();
    // Degree grows like the square root of t, so m substeps cut it by √m.
    let pieces = if full > cfg.degree_cap { ((full as f64 / cfg.degree_cap as f64).powi(2).ceil() as usize).max(2) } else { 1 };
    let dt = t / pieces as f64;
    let mut u = v.to_vec();
    for _ in 0..pieces {
        u = chebyshev::apply(a, &u, dt, bounds, cfg.tail_tol);
    }
    u
}

fn spectrum_bounds(a: &DiscreteOperator, how: SpectrumBound) -> (f64, f64) {
    let (lo, hi) = a.spectrum_bounds();
    match how {
        SpectrumBound::Gershgorin => (lo, hi),
        SpectrumBound::PowerIteration => (lo, (1.02 * power_iteration(a, 300)).min(hi)),
    }
}

/// Rayleigh-quotient estimate of the largest eigenvalue.
pub fn power_iteration(a: &DiscreteOperator, iterations: usize) -> f64 {
    let n = a.size();
    // Deterministic start with components in every eigendirection generically.
    let mut v: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) * 0.754_877_666).sin()).collect();
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        a.apply(&v, &mut w);
        lambda = v.iter().zip(&w).map(|(x, y)| x * y).sum();
        std::mem::swap(&mut v, &mut w);
    }
    lambda
}

/// `K_t(·; y)` for the grid point `source`.
pub fn kernel_column(a: &DiscreteOperator, source: usize, t: f64, backend: HeatBackend) -> Result<HeatField> {
    kernel_column_with(a, source, t, backend, &EvolveConfig::default())
}

pub fn kernel_column_with(
    a: &DiscreteOperator,
    source: usize,
    t: f64,
    backend: HeatBackend,
    cfg: &EvolveConfig,
) -> Result<HeatField> {
    if !(t > 0.0) {
        return Err(LabError::arg(format!("kernel time must be positive, got {t}")));
    }
    if source >= a.size() {
        return Err(LabError::arg(format!("source index {source} out of range")));
    }
    let mut delta = vec![0.0; a.size()];
    delta[source] = 1.0 / a.mesh().cell_volume();
    let mut f = heat_evolve_with(a, &delta, t, backend, cfg)?;
    f.source = Some(source);
    Ok(f)
}

/// Which diagonal entries `K_t(x_i; x_i)` a sup is taken over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SampleStrategy {
    #[default]
    AllDiagonal,
    /// Points at least `margin` from every wall, every `stride`-th per axis.
    Interior {
        margin: f64,
        #[serde(default = "one")]
        stride: usize,
    },
    /// Grid points nearest to the listed coordinates.
    Points { points: Vec<Vec<f64>> },
}

fn one() -> usize {
    1
}

impl SampleStrategy {
    pub fn tag(&self) -> String {
        match self {
            SampleStrategy::AllDiagonal => "all_diagonal".into(),
            SampleStrategy::Interior { margin, stride } => format!("interior(margin={margin},stride={stride})"),
            SampleStrategy::Points { points } => format!("points({})", points.len()),
        }
    }

    pub fn indices(&self, mesh: &Mesh) -> Vec<usize> {
        match self {
            SampleStrategy::AllDiagonal => (0..mesh.len()).collect(),
            SampleStrategy::Interior { margin, stride } => {
                let stride = (*stride).max(1);
                (0..mesh.len())
                    .filter(|&i| {
                        let ij = mesh.multi_index(i);
                        let p = mesh.point(i);
                        (0..mesh.dimension()).all(|k| {
                            let [a, b] = mesh.bbox()[k];
                            p[k] - a >= *margin - 1e-12 && b - p[k] >= *margin - 1e-12 && ij[k] % stride == 0
                        })
                    })
                    .collect()
            }
            SampleStrategy::Points { points } => {
                let mut idx: Vec<usize> = points.iter().map(|p| mesh.nearest_index(p)).collect();
                idx.sort_unstable();
                idx.dedup();
                idx
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupKernel {
    pub t: f64,
    pub value: f64,
    pub argmax: usize,
    pub strategy: String,
    /// `dense` (eigendecomposition) or `columns` (one evolution per sample).
    pub method: &'static str,
}

/// `max_i K_t(x_i; x_i)` over the sampled diagonal.
pub fn sup_kernel(a: &DiscreteOperator, t: f64, strategy: &SampleStrategy) -> Result<SupKernel> {
    Ok(sup_kernel_series(a, &[t], strategy)?.remove(0))
}

/// [`sup_kernel`] at several times, sharing one eigendecomposition (size up
/// to [`DENSE_LIMIT`]) or one chain of column evolutions per sample point.
pub fn sup_kernel_series(a: &DiscreteOperator, times: &[f64], strategy: &SampleStrategy) -> Result<Vec<SupKernel>> {
    if times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(LabError::arg("sup_kernel times must be positive"));
    }
    let mesh = a.mesh();
    let vol = mesh.cell_volume();
    let samples = strategy.indices(mesh);
    if samples.is_empty() {
        return Err(LabError::arg(format!("sample strategy {} selects no grid points", strategy.tag())));
    }
    let tag = strategy.tag();
    let pick = |t: f64, diag: &dyn Fn(usize) -> f64, method| {
        let (argmax, value) = samples
            .iter()
            .map(|&i| (i, diag(i)))
            .fold((samples[0], f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        SupKernel { t, value, argmax, strategy: tag.clone(), method }
    };
    if a.size() <= DENSE_LIMIT {
        let spec = DenseSpectrum::cached(a);
        return Ok(times
            .iter()
            .map(|&t| {
                let d = spec.diagonal_fn(|l| (-t * l).exp());
                pick(t, &|i| d[i] / vol, "dense")
            })
            .collect());
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&i, &j| times[i].total_cmp(&times[j]));
    let cfg = EvolveConfig::default();
    // Per sample, evolve through the sorted times using the semigroup law.
    let per_sample: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|&s| -> Result<Vec<f64>> {
            let mut u = vec![0.0; a.size()];
            u[s] = 1.0 / vol;
            let mut now = 0.0;
            let mut out = vec![0.0; times.len()];
            for &k in &order {
                u = heat_evolve_with(a, &u, times[k] - now, HeatBackend::ChebyshevExp, &cfg)?.values;
                now = times[k];
                out[k] = u[s];
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let lookup = |i: usize| per_sample[samples.binary_search(&i).unwrap()][k];
            pick(t, &lookup, "columns")
        })
        .collect())
}

/// `(I + r²A)^{-m} φ`.
pub fn resolvent_power_apply(a: &DiscreteOperator, r: f64, m: usize, phi: &[f64]) -> Result<Vec<f64>> {
    if !(r > 0.0 && r.is_finite()) || m == 0 {
        return Err(LabError::arg(format!("resolvent power needs r > 0 and m >= 1, got r = {r}, m = {m}")));
    }
    let solver = ShiftedSolver::new(a, r * r);
    let mut u = phi.to_vec();
    for _ in 0..m {
        let next = solver.solve(&u)?;
        if solver.is_direct() {
            let res = solver.residual(&next, &u);
            if res >= 1e-12 {
                return Err(LabError::Solver { iterations: 1, residual: res });
            }
        }
        u = next;
    }
    Ok(u)
}

/// `K_{(I + r²A)^{-2m}}(x_i; x_i) = Σ_j ((I + r²A)^{-m} e_i)_j² / cell_volume`.
pub fn resolvent_diagonal(a: &DiscreteOperator, r: f64, m: usize, index: usize) -> Result<f64> {
    let mut e = vec![0.0; a.size()];
    e[index] = 1.0;
    let u = resolvent_power_apply(a, r, m, &e)?;
    Ok(u.iter().map(|v| v * v).sum::<f64>() / a.mesh().cell_volume())
}
