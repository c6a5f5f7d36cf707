use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{evolve_series, inner, norm2, random_fields, CheckOutcome, CheckRecord, Table, Witness};
use crate::error::{LabError, Result};
use crate::evolve::{heat_evolve, wave_evolve, HeatBackend};
use crate::grid::DiscreteOperator;
use crate::metric::{DistanceField, DistanceMethod};

/// Worst ratio of an 8-neighbour graph path to the straight-line length.
const OCTILE_FACTOR: f64 = 1.082_392_200_292_394;

/// `max_t ‖e^{-tA}𝟙 − 𝟙‖_∞`; holds below `1e-9`.
pub fn conservation_defect(a: &DiscreteOperator, t_grid: &[f64]) -> Result<CheckOutcome> {
    let started = Instant::now();
    let ones = vec![1.0; a.size()];
    let mut table = Table::new("conservation", &["t", "defect", "argmax"]);
    let mut worst = (0.0, 0usize, 0.0);
    for (t, u) in t_grid.iter().zip(evolve_series(a, &ones, t_grid)?) {
        let (i, d) = u.iter().map(|v| (v - 1.0).abs()).enumerate().fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        table.push(vec![*t, d, i as f64]);
        if d >= worst.0 {
            worst = (d, i, *t);
        }
    }
    let ok = worst.0 < 1e-9;
    let rec = CheckRecord::verdict(
        "conservation",
        "conservation: the semigroup maps the constant function 1 to itself",
        ok,
        Witness { indices: vec![worst.1], t: Some(worst.2), values: vec![worst.0] },
    )
    .value(worst.0)
    .margin(1e-9 - worst.0)
    .count(t_grid.len());
    Ok(CheckOutcome::new(vec![rec], vec![table]).stamp("conservation", started))
}

/// A ball `B_C(center; radius)` together with the distance field from its
/// center, computed at the same ε as the operator.
#[derive(Debug, Clone)]
pub struct Ball {
    pub radius: f64,
    pub field: DistanceField,
}

impl Ball {
    pub fn center(&self) -> usize {
        self.field.sources[0]
    }

    pub fn indicator(&self) -> Vec<f64> {
        let c = self.center();
        self.field.values.iter().enumerate().map(|(i, d)| if *d < self.radius || i == c { 1.0 } else { 0.0 }).collect()
    }

    /// Lower bound for `d_C` between the centers; graph distances in 2D are
    /// deflated by the octile factor so the bound stays conservative.
    fn center_distance(&self, other: &Ball) -> f64 {
        let d = self.field.values[other.center()];
        if self.field.method == DistanceMethod::GraphGeodesic && self.field.mesh.dimension() == 2 {
            d / OCTILE_FACTOR
        } else {
            d
        }
    }
}

/// Longest single edge on any graph geodesic between the two centers,
/// measured in the ball metric. Edges `(x, y)` lie on a geodesic when both
/// endpoints satisfy `d₁ + d₂ = D` and `|d₁(y) − d₁(x)|` is the edge length.
fn geodesic_edge_max(b1: &Ball, b2: &Ball) -> f64 {
    let (f1, f2) = (&b1.field, &b2.field);
    let mesh = &f1.mesh;
    let total = f1.values[b2.center()];
    if !total.is_finite() {
        return f64::INFINITY;
    }
    let tol = 1e-9 * total.max(1e-300);
    let on = |i: usize| (f1.values[i] + f2.values[i] - total).abs() <= tol;
    let m = mesh.points_per_axis() as isize;
    let d = mesh.dimension();
    let offsets: &[[isize; 2]] = if d == 1 { &[[1, 0]] } else { &[[1, 0], [0, 1], [1, 1], [1, -1]] };
    let mut worst: f64 = 0.0;
    for i in (0..mesh.len()).filter(|i| on(*i)) {
        let ij = mesh.multi_index(i);
        for off in offsets {
            let (a, b) = (ij[0] as isize + off[0], ij[1] as isize + off[1]);
            if a < 0 || b < 0 || a >= m || (d == 2 && b >= m) {
                continue;
            }
            let j = mesh.index([a as usize, b as usize]);
            if on(j) {
                worst = worst.max((f1.values[j] - f1.values[i]).abs());
            }
        }
    }
    worst
}

/// `|(φ₁, e^{-tA} φ₂)| ≤ e^{-d̃²/(4t)} ‖φ₁‖₂ ‖φ₂‖₂` for ball indicators, with
/// `d̃ = max(d_C(x₁; x₂) − r₁ − r₂, 0)`, over every ball pair and time.
///
/// A combination counts only when `t ≥ ℓ²`, `ℓ` being the longest single
/// edge on a geodesic between the centers. Below that scale the discrete
/// semigroup crosses the edge by one jump, whose probability is linear in
/// `t`, and no Gaussian tail can be expected. An exactly zero `lhs` is always
/// counted, since a cut edge is never crossed. Skipped rows stay in the table
/// with `resolved = 0`.
pub fn offdiagonal_gaussian_check(a: &DiscreteOperator, balls: &[Ball], t_grid: &[f64]) -> Result<CheckOutcome> {
    let started = Instant::now();
    if balls.len() < 2 {
        return Err(LabError::arg("the off-diagonal check needs at least two balls"));
    }
    let vol = a.mesh().cell_volume();
    let phis: Vec<Vec<f64>> = balls.iter().map(Ball::indicator).collect();
    let mut table = Table::new(
        "offdiagonal_gaussian",
        &["i", "j", "t", "d_tilde", "edge_max", "resolved", "lhs", "bound", "log_margin", "holds"],
    );
    let mut pairs = Vec::new();
    for i in 0..balls.len() {
        for j in i + 1..balls.len() {
            let d = balls[i].center_distance(&balls[j]).min(balls[j].center_distance(&balls[i]));
            pairs.push((i, j, (d - balls[i].radius - balls[j].radius).max(0.0), geodesic_edge_max(&balls[i], &balls[j])));
        }
    }
    let evolved: Vec<Vec<Vec<f64>>> = phis.iter().map(|p| evolve_series(a, p, t_grid)).collect::<Result<_>>()?;
    let mut summary = Summary::default();
    let mut skipped = 0;
    for &(i, j, dt, edge) in &pairs {
        for (k, &t) in t_grid.iter().enumerate() {
            let lhs = inner(&phis[i], &evolved[j][k], vol).abs();
            let scale = norm2(&phis[i], vol) * norm2(&phis[j], vol);
            let bound = (-dt * dt / (4.0 * t)).exp() * scale;
            let resolved = t >= edge * edge || lhs == 0.0;
            let row = vec![i as f64, j as f64, t, dt, edge, if resolved { 1.0 } else { 0.0 }];
            if resolved {
                summary.add(&mut table, row, lhs, bound, scale, vec![balls[i].center(), balls[j].center()], t);
            } else {
                skipped += 1;
                let mut row = row;
                row.extend([lhs, bound, f64::NAN, f64::NAN]);
                table.push(row);
            }
        }
    }
    let rec = summary
        .record("offdiagonal_gaussian", "off-diagonal Gaussian bound exp(-d_C(B1;B2)^2/(4t)) for ball indicators")
        .note(format!("{skipped} combinations below the edge scale t < l^2 skipped"));
    Ok(CheckOutcome::new(vec![rec], vec![table]).stamp("offdiagonal_gaussian", started))
}

/// As [`offdiagonal_gaussian_check`] with the Euclidean distance of the cell
/// unions and `4‖C‖t` in the exponent. `sets` are index masks.
pub fn euclidean_offdiagonal_check(a: &DiscreteOperator, sets: &[Vec<bool>], c_norm: f64, t_grid: &[f64]) -> Result<CheckOutcome> {
    let started = Instant::now();
    if sets.len() < 2 || sets.iter().any(|s| s.len() != a.size()) {
        return Err(LabError::arg("the Euclidean check needs at least two masks of operator size"));
    }
    if !(c_norm > 0.0) {
        return Err(LabError::arg("the coefficient norm must be positive"));
    }
    let mesh = a.mesh();
    let vol = mesh.cell_volume();
    let dim = mesh.dimension();
    let cell_diag = mesh.h() * (dim as f64).sqrt();
    let phis: Vec<Vec<f64>> = sets.iter().map(|s| s.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect()).collect();
    let members: Vec<Vec<[f64; 2]>> =
        sets.iter().map(|s| (0..s.len()).filter(|i| s[*i]).map(|i| mesh.point(i)).collect()).collect();
    let evolved: Vec<Vec<Vec<f64>>> = phis.iter().map(|p| evolve_series(a, p, t_grid)).collect::<Result<_>>()?;
    let mut table = Table::new("euclidean_offdiagonal", &["i", "j", "t", "d_e", "lhs", "bound", "log_margin", "holds"]);
    let mut summary = Summary::default();
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            let mut d = f64::INFINITY;
            for p in &members[i] {
                for q in &members[j] {
                    d = d.min((0..dim).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>().sqrt());
                }
            }
            // Cells around the points reach up to half a diagonal further.
            let de = (d - cell_diag).max(0.0);
            for (k, &t) in t_grid.iter().enumerate() {
                let lhs = inner(&phis[i], &evolved[j][k], vol).abs();
                let scale = norm2(&phis[i], vol) * norm2(&phis[j], vol);
                let bound = (-de * de / (4.0 * c_norm * t)).exp() * scale;
                summary.add(&mut table, vec![i as f64, j as f64, t, de], lhs, bound, scale, vec![i, j], t);
            }
        }
    }
    let rec = summary.record("euclidean_offdiagonal", "Euclidean off-diagonal bound exp(-d_e(V1;V2)^2/(4|C|t))");
    Ok(CheckOutcome::new(vec![rec], vec![table]).stamp("euclidean_offdiagonal", started))
}

#[derive(Default)]
struct Summary {
    count: usize,
    min_margin: f64,
    worst: Option<(Vec<usize>, f64, f64, f64)>,
    violated: bool,
}

impl Summary {
    /// `lhs` passes below `bound (1 + 1e-6)` plus a round-off floor of
    /// `1e-12 · scale`, where `scale = ‖φ₁‖₂ ‖φ₂‖₂`; the log margin is taken
    /// against the same allowance, so it is negative exactly on failure.
    fn add(&mut self, table: &mut Table, mut row: Vec<f64>, lhs: f64, bound: f64, scale: f64, idx: Vec<usize>, t: f64) {
        let allowed = bound * (1.0 + 1e-6) + 1e-12 * scale;
        let ok = lhs <= allowed;
        let log_margin = if lhs > 0.0 { allowed.ln() - lhs.ln() } else { f64::INFINITY };
        if self.count == 0 || log_margin < self.min_margin {
            self.min_margin = log_margin;
            if !self.violated {
                self.worst = Some((idx.clone(), t, lhs, bound));
            }
        }
        if !ok && !self.violated {
            self.violated = true;
            self.worst = Some((idx, t, lhs, bound));
        }
        self.count += 1;
        row.extend([lhs, bound, log_margin, if ok { 1.0 } else { 0.0 }]);
        table.push(row);
    }

    fn record(&self, name: &str, anchor: &str) -> CheckRecord {
        let (indices, t, lhs, bound) = self.worst.clone().unwrap_or((vec![], 0.0, 0.0, 0.0));
        CheckRecord::verdict(name, anchor, !self.violated, Witness { indices, t: Some(t), values: vec![lhs, bound] })
            .margin(self.min_margin)
            .count(self.count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveSpeedConfig {
    pub cfl_safety: f64,
    /// Points with `|u| > threshold · ‖φ₀‖_∞` count as excited.
    pub threshold: f64,
}

impl Default for WaveSpeedConfig {
    fn default() -> Self {
        WaveSpeedConfig { cfl_safety: 0.95, threshold: 1e-8 }
    }
}

/// Finite propagation speed: the excited set of `cos(t A^{1/2}) φ₀` stays
/// within `d_C`-distance `t + 4h(1 + 0.01 t/h)` of the initial support.
///
/// `field` holds distances from the initial support. Points in
/// `beyond_cut`, if given, must never be excited.
pub fn wave_speed_check(
    a: &DiscreteOperator,
    field: &DistanceField,
    phi0: &[f64],
    t_list: &[f64],
    beyond_cut: Option<&[bool]>,
    cfg: &WaveSpeedConfig,
) -> Result<CheckOutcome> {
    let started = Instant::now();
    let h = a.mesh().h();
    let sup0 = phi0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let thr = cfg.threshold * sup0;
    let mut table = Table::new("wave_speed", &["t", "reach", "allowed", "speed", "cut_excitation", "energy_drift"]);
    let mut ok = true;
    let mut speed: f64 = 0.0;
    let mut cut_max: f64 = 0.0;
    let mut witness = Witness { indices: vec![], t: None, values: vec![] };
    let mut cut_witness = witness.clone();
    for &t in t_list {
        let w = wave_evolve(a, phi0, t, cfg.cfl_safety)?;
        let u = &w.displacement;
        let (far_i, reach) = u
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > thr)
            .map(|(i, _)| (i, field.values[i]))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let disp = 4.0 * h * (1.0 + 0.01 * t / h);
        if reach > t + disp && ok {
            ok = false;
            witness = Witness { indices: vec![far_i], t: Some(t), values: vec![reach, t + disp] };
        }
        let s = if t > 0.0 { ((reach - disp) / t).max(0.0) } else { 0.0 };
        speed = speed.max(s);
        let cut = beyond_cut.map_or(0.0, |m| (0..u.len()).filter(|i| m[*i]).map(|i| u[i].abs()).fold(0.0, f64::max));
        if cut > cut_max {
            cut_max = cut;
            let i = (0..u.len()).filter(|i| beyond_cut.unwrap()[*i]).max_by(|&i, &j| u[i].abs().total_cmp(&u[j].abs())).unwrap();
            cut_witness = Witness { indices: vec![i], t: Some(t), values: vec![cut] };
        }
        table.push(vec![t, reach, t + disp, s, cut, w.energy_drift]);
    }
    let mut records = vec![CheckRecord::verdict("wave_speed", "finite speed: cos(tH^(1/2)) moves supports by at most t in d_C", ok, witness)
        .value(speed)
        .count(t_list.len())];
    if beyond_cut.is_some() {
        let cut_ok = cut_max <= thr;
        records.push(
            CheckRecord::verdict("wave_cut", "no wave crosses a zero-conductance cut", cut_ok, cut_witness)
                .value(cut_max)
                .count(t_list.len()),
        );
    }
    Ok(CheckOutcome::new(records, vec![table]).stamp("wave_speed", started))
}

/// Structural properties of an assembled generator and its semigroup: the
/// M-matrix conditions, the semigroup law, ℓ₁/ℓ₂/ℓ_∞ contraction and
/// positivity preservation, each on seeded random data.
pub fn structure_check(a: &DiscreteOperator, t: f64, seed: u64) -> Result<CheckOutcome> {
    let started = Instant::now();
    let n = a.size();
    let m = a.markov_check(seed);
    let mut records = vec![CheckRecord::verdict(
        "m_matrix",
        "Markov generator: symmetric, nonpositive off-diagonal, zero row sums",
        m.holds(),
        Witness { indices: vec![], t: None, values: vec![m.max_row_sum, m.max_positive_offdiag, m.min_rayleigh] },
    )
    .value(m.max_row_sum / m.norm_inf.max(f64::MIN_POSITIVE))
    .note(if m.symmetric { "" } else { "not symmetric" })];

    let signed = random_fields(n, 4, -1.0..1.0, seed);
    let positive = random_fields(n, 4, 0.0..1.0, seed ^ 0x9e37_79b9);
    let mut table = Table::new("structure", &["sample", "semigroup", "l1_ratio", "l2_ratio", "linf_ratio", "min_over_max"]);
    let (mut law, mut l1, mut l2, mut linf, mut neg): (f64, f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let backend = HeatBackend::ChebyshevExp;
    for (k, (phi, pos)) in signed.iter().zip(&positive).enumerate() {
        let full = heat_evolve(a, phi, t, backend)?.values;
        let half = heat_evolve(a, phi, t / 3.0, backend)?.values;
        let chained = heat_evolve(a, &half, 2.0 * t / 3.0, backend)?.values;
        let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let law_k = full.iter().zip(&chained).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / inf(phi);
        let p = |v: &[f64], q: f64| v.iter().map(|x| x.abs().powf(q)).sum::<f64>().powf(1.0 / q);
        let (r1, r2, ri) = (p(&full, 1.0) / p(phi, 1.0), p(&full, 2.0) / p(phi, 2.0), inf(&full) / inf(phi));
        let up = heat_evolve(a, pos, t, backend)?.values;
        let neg_k = -up.iter().fold(f64::INFINITY, |m, x| m.min(*x)) / inf(pos);
        table.push(vec![k as f64, law_k, r1, r2, ri, -neg_k]);
        law = law.max(law_k);
        l1 = l1.max(r1 - 1.0);
        l2 = l2.max(r2 - 1.0);
        linf = linf.max(ri - 1.0);
        neg = neg.max(neg_k);
    }
    let w = |v: f64| Witness { indices: vec![], t: Some(t), values: vec![v] };
    records.push(CheckRecord::verdict("semigroup_law", "semigroup law S_s S_t = S_(s+t)", law <= 1e-9, w(law)).value(law));
    for (name, excess) in [("contraction_l1", l1), ("contraction_l2", l2), ("contraction_linf", linf)] {
        records.push(
            CheckRecord::verdict(name, "the semigroup contracts every L_p norm", excess <= 1e-10, w(excess)).value(excess),
        );
    }
    records.push(
        CheckRecord::verdict("positivity", "the semigroup maps nonnegative data to nonnegative data", neg <= 1e-10, w(neg))
            .value(neg),
    );
    Ok(CheckOutcome::new(records, vec![table]).stamp("structure", started))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::CoefficientProfile;
    use crate::grid::{assemble, Mesh};
    use crate::metric::distance_field;

    fn laplace(n: usize) -> DiscreteOperator {
        let p = CoefficientProfile::laplacian(1, vec![[-4.0, 4.0]]).unwrap();
        assemble(&p, &Mesh::interval(-4.0, 4.0, n).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn conservation_and_sabotage() {
        let a = laplace(128);
        assert!(conservation_defect(&a, &[0.1, 0.5, 1.0]).unwrap().all_hold());
        let bad = a.sabotage_row_sum(40, 1e-3);
        let out = conservation_defect(&bad, &[1e-5, 1e-4]).unwrap();
        let rec = out.record("conservation").unwrap();
        assert_eq!(rec.status, super::super::Status::Violated);
        // First-order expansion while t is below the cell diffusion time h².
        assert!((rec.value.unwrap() - 1e-7).abs() < 5e-9, "{:?}", rec.value);
    }

    #[test]
    fn laplacian_balls_hold() {
        let p = CoefficientProfile::laplacian(1, vec![[-4.0, 4.0]]).unwrap();
        let mesh = Mesh::interval(-4.0, 4.0, 256).unwrap();
        let a = assemble(&p, &mesh, 0.0).unwrap();
        let balls: Vec<Ball> = [-2.0, 2.0, 0.2]
            .iter()
            .map(|c| Ball { radius: 0.5, field: distance_field(&p, &mesh, &[*c], 0.0).unwrap() })
            .collect();
        let out = offdiagonal_gaussian_check(&a, &balls, &[0.01, 0.1, 1.0]).unwrap();
        assert!(out.all_hold());
        assert_eq!(out.records[0].count, 9);
    }

    #[test]
    fn euclidean_gaussian_oracle() {
        let a = laplace(256);
        let mesh = a.mesh().clone();
        let left = mesh.mask(|x| x[0] < -0.5);
        let right = mesh.mask(|x| x[0] > 0.5);
        let out = euclidean_offdiagonal_check(&a, &[left, right], 1.0, &[0.05]).unwrap();
        assert!(out.all_hold());
        let t = out.table("euclidean_offdiagonal").unwrap();
        let bound = t.column("bound").unwrap()[0];
        // Nearest members sit at ±(1/2 + h); the cell unions are 1 + h apart.
        let h = mesh.h();
        let count = (0..mesh.len()).filter(|i| mesh.point(*i)[0] < -0.5).count() as f64;
        let expect = (-(1.0 + h).powi(2) / 0.2).exp() * count * h;
        assert!((bound - expect).abs() < 1e-12 * expect, "{bound} {expect}");
        assert!(t.column("lhs").unwrap()[0] < 1e-2 * bound);
    }

    #[test]
    fn structure_detects_sabotage() {
        let a = laplace(64);
        assert!(structure_check(&a, 0.3, 1).unwrap().all_hold());
        let bad = a.sabotage_positive_offdiag(10, 20, 5.0);
        let out = structure_check(&bad, 0.3, 1).unwrap();
        assert_eq!(out.record("m_matrix").unwrap().status, super::super::Status::Violated);
    }
}
