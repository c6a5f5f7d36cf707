//! Intrinsic distance `d_C`, its viscosity approximations, balls, and
//! Hölder fits.
//!
//! In 1D the distance is `∫ (c + ε)^{-1/2}`, integrated with the `s⁴`
//! substitution toward every degeneracy point. In 2D it is the shortest path
//! on the 8-neighbour grid graph; edges near the degeneracy set get a refined
//! line integral. `+∞` is an ordinary value.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coeffs::{degenerate_profile, CoefficientProfile, Family, QuadratureConfig, ZeroSite};
use crate::error::{LabError, Result};
use crate::grid::Mesh;
use crate::quad::{adaptive, dyadic_tail, graded, GaussLegendre, TailConfig, TailVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceMethod {
    Quadrature1D,
    GraphGeodesic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceField {
    pub origin: Vec<f64>,
    pub sources: Vec<usize>,
    pub values: Vec<f64>,
    pub epsilon: f64,
    pub method: DistanceMethod,
    #[serde(skip)]
    pub mesh: Mesh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceOptions {
    /// Edges whose midpoint integrand exceeds `1 / edge_floor` are refined.
    pub edge_floor: f64,
    /// Edges whose midpoint lies within this many edge lengths of the
    /// degeneracy set are refined as well.
    pub near_factor: f64,
    pub rel_tol: f64,
    /// 1D edges take the exact integral instead of the edge rule.
    pub exact_1d: bool,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        DistanceOptions { edge_floor: 1e-3, near_factor: 8.0, rel_tol: 1e-10, exact_1d: true }
    }
}

impl DistanceOptions {
    /// Plain midpoint weights `len · (c(mid) + ε)^{-1/2}`, refined only where
    /// the integrand exceeds `1 / edge_floor`. Each edge then has the length
    /// the midpoint face conductance `c(mid)/h²` assigns it, so off-diagonal
    /// bounds for an assembled operator are measured in its own metric.
    pub fn midpoint() -> Self {
        DistanceOptions { near_factor: 0.0, exact_1d: false, ..Self::default() }
    }
}

/// Points and intervals where a 1D coefficient vanishes (before any shift).
struct Singular {
    points: Vec<f64>,
    intervals: Vec<(f64, f64)>,
}

fn singular_set_1d(profile: &CoefficientProfile) -> Result<Singular> {
    match profile.family() {
        Family::PowerDegenerate { delta, centers } if *delta > 0.0 => {
            let mut points: Vec<f64> = centers.iter().map(|c| c[0]).collect();
            points.sort_by(f64::total_cmp);
            Ok(Singular { points, intervals: Vec::new() })
        }
        Family::RadialShell { delta, radius } if *delta > 0.0 => {
            Ok(Singular { points: vec![-radius, *radius], intervals: Vec::new() })
        }
        Family::Sampled(_) => {
            let c = profile.without_shift().classify(&QuadratureConfig::default())?;
            let mut s = Singular { points: Vec::new(), intervals: Vec::new() };
            for z in c.zeros {
                match z {
                    ZeroSite::Point(p) => s.points.push(p),
                    ZeroSite::Interval(a, b) => s.intervals.push((a, b)),
                }
            }
            Ok(s)
        }
        _ => Ok(Singular { points: Vec::new(), intervals: Vec::new() }),
    }
}

/// Coefficient at `z0 + d`, keeping full precision in `d` when `z0` is a
/// power-family center.
fn coefficient_near(profile: &CoefficientProfile, z0: f64, d: f64) -> f64 {
    if let Family::PowerDegenerate { delta, centers } = profile.family() {
        if centers.iter().any(|c| c[0] == z0) {
            let rho = centers
                .iter()
                .map(|c| if c[0] == z0 { d.abs() } else { (z0 + d - c[0]).abs() })
                .fold(f64::INFINITY, f64::min);
            return degenerate_profile(rho, *delta) + profile.epsilon();
        }
    }
    if let Family::RadialShell { delta, radius } = profile.family() {
        if z0.abs() == *radius {
            let rho = d.abs().min((2.0 * z0 + d).abs());
            return degenerate_profile(rho, *delta) + profile.epsilon();
        }
    }
    profile.smallest_eigenvalue_unchecked(&[z0 + d])
}

/// `d_{C_ε}(x; y) = |∫_x^y (c(z) + ε)^{-1/2} dz|`, possibly `+∞`.
///
/// Returns an `Inconclusive` error when the tail test near a zero cannot
/// decide integrability.
pub fn distance_1d(profile: &CoefficientProfile, x: f64, y: f64, epsilon: f64) -> Result<f64> {
    check_1d(profile, epsilon)?;
    for z in [x, y] {
        if !profile.contains(&[z]) {
            return Err(LabError::Domain { point: vec![z], domain: profile.domain().to_vec() });
        }
    }
    let sing = singular_set_1d(profile)?;
    distance_1d_inner(profile, &sing, x, y, epsilon, 1e-10)
}

fn check_1d(profile: &CoefficientProfile, epsilon: f64) -> Result<()> {
    if profile.dimension() != 1 {
        return Err(LabError::Unsupported("distance_1d needs a 1D profile".into()));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(LabError::arg(format!("epsilon must be finite and nonnegative, got {epsilon}")));
    }
    Ok(())
}

fn distance_1d_inner(profile: &CoefficientProfile, sing: &Singular, x: f64, y: f64, eps: f64, rel_tol: f64) -> Result<f64> {
    let (x, y) = if x <= y { (x, y) } else { (y, x) };
    if x == y {
        return Ok(0.0);
    }
    let shifted = profile.epsilon() + eps > 0.0;
    if !shifted && sing.intervals.iter().any(|&(a, b)| a < y && b > x) {
        return Ok(f64::INFINITY);
    }
    let integrand = |z0: f64, d: f64| (coefficient_near(profile, z0, d) + eps).powf(-0.5);
    let mut cuts = vec![x];
    cuts.extend(sing.points.iter().copied().filter(|p| *p > x && *p < y));
    cuts.push(y);
    let is_zero = |p: f64| sing.points.contains(&p);
    let tail_cfg = TailConfig::default();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (p, q) = (w[0], w[1]);
        let mid = 0.5 * (p + q);
        for (z0, len) in [(p, mid - p), (q, mid - q)] {
            if is_zero(z0) {
                if !shifted {
                    match dyadic_tail(|d| integrand(z0, d), len, &tail_cfg).verdict {
                        TailVerdict::Diverges => return Ok(f64::INFINITY),
                        TailVerdict::Ambiguous => {
                            return Err(LabError::Inconclusive(format!(
                                "integrability of c^(-1/2) at {z0} could not be decided"
                            )))
                        }
                        TailVerdict::Converges { .. } => {}
                    }
                }
                total += graded(|d| integrand(z0, d), len, rel_tol).value;
            } else {
                let (a, b) = if len > 0.0 { (z0, z0 + len) } else { (z0 + len, z0) };
                total += adaptive(|z| integrand(z, 0.0), a, b, rel_tol, 2000).value;
            }
        }
    }
    Ok(total)
}

/// Distance field from the grid point nearest to `origin`.
pub fn distance_field(profile: &CoefficientProfile, mesh: &Mesh, origin: &[f64], epsilon: f64) -> Result<DistanceField> {
    let src = mesh.nearest_index(origin);
    distance_field_from(profile, mesh, &[src], epsilon, &DistanceOptions::default())
}

/// Graph geodesic distance to the nearest of `sources` (Dijkstra).
pub fn distance_field_from(
    profile: &CoefficientProfile,
    mesh: &Mesh,
    sources: &[usize],
    epsilon: f64,
    opts: &DistanceOptions,
) -> Result<DistanceField> {
    if profile.dimension() != mesh.dimension() {
        return Err(LabError::arg("profile and mesh dimensions differ"));
    }
    if !profile.is_scalar() {
        return Err(LabError::Unsupported("distance fields need a scalar coefficient".into()));
    }
    if sources.is_empty() || sources.iter().any(|s| *s >= mesh.len()) {
        return Err(LabError::arg("distance field needs valid source indices"));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(LabError::arg(format!("epsilon must be finite and nonnegative, got {epsilon}")));
    }
    let edge = EdgeRule::new(profile, mesh, epsilon, opts)?;
    let n = mesh.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s] = 0.0;
        heap.push(Entry(0.0, s));
    }
    let m = mesh.points_per_axis() as isize;
    let offsets: Vec<[isize; 2]> = if mesh.dimension() == 1 {
        vec![[-1, 0], [1, 0]]
    } else {
        vec![[-1, 0], [1, 0], [0, -1], [0, 1], [-1, -1], [-1, 1], [1, -1], [1, 1]]
    };
    while let Some(Entry(d, i)) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        let ij = mesh.multi_index(i);
        for off in &offsets {
            let (a, b) = (ij[0] as isize + off[0], ij[1] as isize + off[1]);
            if a < 0 || b < 0 || a >= m || (mesh.dimension() == 2 && b >= m) {
                continue;
            }
            let j = mesh.index([a as usize, b as usize]);
            let w = edge.weight(i, j)?;
            let nd = d + w;
            if nd < dist[j] {
                dist[j] = nd;
                heap.push(Entry(nd, j));
            }
        }
    }
    let p = mesh.point(sources[0]);
    Ok(DistanceField {
        origin: p[..mesh.dimension()].to_vec(),
        sources: sources.to_vec(),
        values: dist,
        epsilon,
        method: DistanceMethod::GraphGeodesic,
        mesh: mesh.clone(),
    })
}

/// `distance_1d` from `origin` to every grid point.
pub fn distance_field_quadrature(profile: &CoefficientProfile, mesh: &Mesh, origin: f64, epsilon: f64) -> Result<DistanceField> {
    check_1d(profile, epsilon)?;
    let sing = singular_set_1d(profile)?;
    let src = mesh.nearest_index(&[origin]);
    let o = mesh.point(src)[0];
    let values = (0..mesh.len())
        .map(|i| distance_1d_inner(profile, &sing, o, mesh.point(i)[0], epsilon, 1e-10))
        .collect::<Result<Vec<_>>>()?;
    Ok(DistanceField {
        origin: vec![o],
        sources: vec![src],
        values,
        epsilon,
        method: DistanceMethod::Quadrature1D,
        mesh: mesh.clone(),
    })
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct EdgeRule<'a> {
    profile: &'a CoefficientProfile,
    mesh: &'a Mesh,
    eps: f64,
    opts: DistanceOptions,
    sing: Option<Singular>,
    gl8: GaussLegendre,
}

impl<'a> EdgeRule<'a> {
    fn new(profile: &'a CoefficientProfile, mesh: &'a Mesh, eps: f64, opts: &DistanceOptions) -> Result<Self> {
        let sing = if mesh.dimension() == 1 { Some(singular_set_1d(profile)?) } else { None };
        Ok(EdgeRule { profile, mesh, eps, opts: *opts, sing, gl8: GaussLegendre::new(8) })
    }

    fn c(&self, x: &[f64]) -> f64 {
        self.profile.smallest_eigenvalue_unchecked(x) + self.eps
    }

    fn weight(&self, i: usize, j: usize) -> Result<f64> {
        let (p, q) = (self.mesh.point(i), self.mesh.point(j));
        if let (Some(sing), true) = (&self.sing, self.opts.exact_1d) {
            return distance_1d_inner(self.profile, sing, p[0], q[0], self.eps, self.opts.rel_tol);
        }
        let d = self.mesh.dimension();
        let len = (q[0] - p[0]).hypot(q[1] - p[1]);
        let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
        let cm = self.c(&mid[..d]);
        let near = self.profile.rho(&mid[..d]) < self.opts.near_factor * len;
        if cm > 0.0 && cm.powf(-0.5) <= 1.0 / self.opts.edge_floor && !near {
            return Ok(len * cm.powf(-0.5));
        }
        let at = |s: f64| [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
        // Rounding next to the degeneracy can return c = 0 at a point off the
        // set; such nodes contribute nothing, which only shortens the edge.
        let f = |s: f64| {
            let v = self.c(&at(s)[..d]).powf(-0.5);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        if self.profile.crosses_degeneracy(&p[..d], &q[..d]) || self.profile.rho(&p[..d]) == 0.0 || self.profile.rho(&q[..d]) == 0.0 {
            let s0 = self.crossing(&p, &q);
            let mut total = 0.0;
            for (a, b) in [(s0, 0.0), (s0, 1.0)] {
                if a != b {
                    total += graded(|d| f(a + d), b - a, 1e-8).value;
                }
            }
            return Ok(len * total);
        }
        Ok(len * self.gl8.integrate(f, 0.0, 1.0))
    }

    /// Parameter in `[0, 1]` where the segment meets the degeneracy set.
    fn crossing(&self, p: &[f64; 2], q: &[f64; 2]) -> f64 {
        let at = |s: f64| [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
        if self.profile.rho(p) == 0.0 {
            return 0.0;
        }
        if self.profile.rho(q) == 0.0 {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.profile.crosses_degeneracy(p, &at(mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

impl DistanceField {
    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Writes `x[,y],d`; infinite distances are written as `inf`.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        crate::evolve::write_field_csv(&self.mesh, &self.values, "d", path)
    }
}

/// `|B_C(x; r)|`: cell volume times the number of points with distance
/// `< r`, optionally restricted to `mask`. The source points always count, so
/// `r = 0` gives one cell per source.
pub fn ball_volume(field: &DistanceField, r: f64, mask: Option<&[bool]>) -> f64 {
    let vol = field.mesh.cell_volume();
    let count = field
        .values
        .iter()
        .enumerate()
        .filter(|(i, d)| (**d < r || field.sources.contains(i)) && mask.map_or(true, |m| m[*i]))
        .count();
    count as f64 * vol
}

/// Writes `r,volume` rows.
pub fn export_ball_volumes(field: &DistanceField, radii: &[f64], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| crate::grid::csv_io(path, e))?;
    w.write_record(["r", "volume"])?;
    for r in radii {
        w.serialize((r, ball_volume(field, *r, None)))?;
    }
    w.flush().map_err(|e| LabError::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderFit {
    pub gamma_hat: f64,
    pub a_hat: f64,
    /// Largest absolute deviation of `log d` from the fitted line.
    pub residual: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Least-squares fit of `log d = log a + γ log |x − y|` over `(|x − y|, d)`
/// pairs; needs at least 12 finite positive samples.
pub fn holder_fit(samples: &[(f64, f64)]) -> Result<HolderFit> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(s, d)| *s > 0.0 && *d > 0.0 && d.is_finite())
        .map(|(s, d)| (s.ln(), d.ln()))
        .collect();
    if pts.len() < 12 {
        return Err(LabError::arg(format!("holder fit needs at least 12 usable samples, got {}", pts.len())));
    }
    let (slope, intercept, stderr) = linear_fit(&pts)?;
    let residual = pts.iter().map(|(x, y)| (y - intercept - slope * x).abs()).fold(0.0, f64::max);
    Ok(HolderFit { gamma_hat: slope, a_hat: intercept.exp(), residual, stderr, samples: pts.len() })
}

/// Ordinary least squares `y = intercept + slope x`, returning the slope's
/// standard error too.
pub(crate) fn linear_fit(pts: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(LabError::arg("fit abscissae have zero variance"));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = if pts.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok((slope, intercept, stderr))
}

/// Hölder fit of `d_C(origin; origin + s)` for `count` log-spaced
/// `s ∈ [lo, hi]`.
pub fn holder_fit_1d(profile: &CoefficientProfile, origin: f64, range: [f64; 2], count: usize, epsilon: f64) -> Result<HolderFit> {
    let [lo, hi] = range;
    if !(lo > 0.0 && hi > lo) || count < 12 {
        return Err(LabError::arg("holder fit needs 0 < lo < hi and at least 12 radii"));
    }
    let samples = log_space(lo, hi, count)
        .into_iter()
        .map(|s| Ok((s, distance_1d(profile, origin, origin + s, epsilon)?)))
        .collect::<Result<Vec<_>>>()?;
    holder_fit(&samples)
}

pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp()).collect()
}
