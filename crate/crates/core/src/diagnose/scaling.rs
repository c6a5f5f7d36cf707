use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{bump, inner, CheckOutcome, CheckRecord, Status, Table, Witness};
use crate::error::{LabError, Result};
use crate::evolve::{heat_evolve, resolvent_diagonal, sup_kernel_series, HeatBackend, SampleStrategy};
use crate::grid::DiscreteOperator;
use crate::metric::{ball_volume, linear_fit, DistanceField};

/// Small-time decay of `sup K_t` against the curve `a t^{-d/(2γ)}`.
///
/// Times below `10 h² ‖C‖` or above `0.1` are dropped. `a` is fitted at the
/// largest remaining time; the check holds when no point exceeds the curve by
/// more than 10% (faster decay is compliant).
pub fn smalltime_decay_fit(
    a: &DiscreteOperator,
    t_grid: &[f64],
    gamma: f64,
    c_norm: f64,
    strategy: &SampleStrategy,
) -> Result<CheckOutcome> {
    let started = Instant::now();
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(LabError::arg(format!("predicted order must lie in (0, 1], got {gamma}")));
    }
    let anchor = "kernel upper bound (mu (t ^ 1))^(-d/(2 gamma)) for subelliptic operators of order gamma";
    let h = a.mesh().h();
    let t_min = 10.0 * h * h * c_norm;
    let mut ts: Vec<f64> = t_grid.iter().copied().filter(|t| *t >= t_min && *t <= 0.1).collect();
    ts.sort_by(f64::total_cmp);
    let d = a.mesh().dimension() as f64;
    let predicted = -d / (2.0 * gamma);
    if ts.len() < 2 {
        let rec = CheckRecord::new("smalltime_decay", anchor, Status::Inconclusive)
            .note(format!("no usable times in [{t_min:e}, 0.1]"));
        return Ok(CheckOutcome::new(vec![rec], vec![]).stamp("smalltime_decay", started));
    }
    let sups = sup_kernel_series(a, &ts, strategy)?;
    let pts: Vec<(f64, f64)> = sups.iter().map(|s| (s.t.ln(), s.value.ln())).collect();
    let (slope, _, stderr) = linear_fit(&pts)?;
    let last = sups.last().unwrap();
    let a_fit = last.value * last.t.powf(-predicted);
    let mut table = Table::new("smalltime_decay", &["t", "sup_kernel", "bound_curve", "argmax"]);
    let mut worst = (0.0, 0usize, 0.0);
    for s in &sups {
        let curve = a_fit * s.t.powf(predicted);
        table.push(vec![s.t, s.value, curve, s.argmax as f64]);
        if s.value / curve > worst.0 {
            worst = (s.value / curve, s.argmax, s.t);
        }
    }
    let rec = CheckRecord::verdict(
        "smalltime_decay",
        anchor,
        worst.0 <= 1.1,
        Witness { indices: vec![worst.1], t: Some(worst.2), values: vec![worst.0] },
    )
    .value(slope)
    .stderr(stderr)
    .margin(1.1 - worst.0)
    .count(ts.len())
    .note(format!("bound slope {predicted:.4}; fitted constant {a_fit:.6e}; sampling {}", strategy.tag()));
    Ok(CheckOutcome::new(vec![rec], vec![table]).stamp("smalltime_decay", started))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FloorMode {
    /// A separated component of volume `component_volume` keeps its mass, so
    /// `sup K_t ≥ 1/component_volume`; `sup K_t · t^{d/2}` must also grow by
    /// `growth` between the first and last time.
    Separated { component_volume: f64, growth: f64 },
    /// Strongly elliptic control: `sup K_t · t^{d/2}` within 20% of
    /// `(4π)^{-d/2}`.
    Gaussian,
}

pub fn largetime_floor_check(a: &DiscreteOperator, mode: FloorMode, t_grid: &[f64], strategy: &SampleStrategy) -> Result<CheckOutcome> {
    let started = Instant::now();
    let mut ts = t_grid.to_vec();
    ts.sort_by(f64::total_cmp);
    if ts.is_empty() {
        return Err(LabError::arg("large-time check needs at least one time"));
    }
    let d = a.mesh().dimension() as f64;
    let sups = sup_kernel_series(a, &ts, strategy)?;
    let mut table = Table::new("largetime", &["t", "sup_kernel", "scaled", "argmax"]);
    for s in &sups {
        table.push(vec![s.t, s.value, s.value * s.t.powf(d / 2.0), s.argmax as f64]);
    }
    let scaled: Vec<f64> = sups.iter().map(|s| s.value * s.t.powf(d / 2.0)).collect();
    let records = match mode {
        FloorMode::Separated { component_volume, growth } => {
            let floor = 1.0 / component_volume;
            let (k, lowest) = sups.iter().map(|s| s.value).enumerate().fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            let floor_rec = CheckRecord::verdict(
                "largetime_floor",
                "separated kernels stay above 1/|component| for all time",
                lowest >= floor * (1.0 - 1e-6),
                Witness { indices: vec![sups[k].argmax], t: Some(sups[k].t), values: vec![lowest, floor] },
            )
            .value(lowest)
            .margin(lowest / floor - 1.0)
            .count(sups.len());
            let ratio = scaled[scaled.len() - 1] / scaled[0];
            let growth_rec = CheckRecord::verdict(
                "largetime_growth",
                "no t^(-d/2) large-time decay once the operator separates",
                ratio >= growth,
                Witness { indices: vec![], t: Some(ts[ts.len() - 1]), values: vec![scaled[0], scaled[scaled.len() - 1]] },
            )
            .value(ratio)
            .margin(ratio - growth)
            .count(sups.len());
            vec![floor_rec, growth_rec]
        }
        FloorMode::Gaussian => {
            let target = (4.0 * std::f64::consts::PI).powf(-d / 2.0);
            let (k, dev) = scaled.iter().map(|v| (v / target - 1.0).abs()).enumerate().fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            vec![CheckRecord::verdict(
                "largetime_gaussian",
                "strongly elliptic kernels decay like (4 pi t)^(-d/2)",
                dev <= 0.2,
                Witness { indices: vec![sups[k].argmax], t: Some(sups[k].t), values: vec![scaled[k], target] },
            )
            .value(dev)
            .margin(0.2 - dev)
            .count(sups.len())]
        }
    };
    Ok(CheckOutcome::new(records, vec![table]).stamp("largetime", started))
}

/// Slope of `log K_{(I + r²A)^{-2m}}(x; x)` against `log |B_C(x; r)|`; holds
/// when it is `−1 ± 0.15` and `K · |B|` varies by at most a factor 3.
///
/// `field` holds `d_C` from `x`. Radii whose ball is infinite in volume do not
/// occur on a finite mesh, so every radius is used.
pub fn resolvent_volume_scaling(a: &DiscreteOperator, field: &DistanceField, r_grid: &[f64], m: usize) -> Result<CheckOutcome> {
    let started = Instant::now();
    let d = a.mesh().dimension();
    if 4 * m <= d {
        return Err(LabError::arg(format!("resolvent power needs 4m > d, got m = {m}, d = {d}")));
    }
    if r_grid.len() < 3 {
        return Err(LabError::arg("resolvent scaling needs at least three radii"));
    }
    let x = field.sources[0];
    let mut table = Table::new("resolvent_volume", &["r", "volume", "kernel", "product"]);
    let mut pts = Vec::new();
    let mut products = Vec::new();
    for &r in r_grid {
        let vol = ball_volume(field, r, None);
        let k = resolvent_diagonal(a, r, m, x)?;
        table.push(vec![r, vol, k, k * vol]);
        pts.push((vol.ln(), k.ln()));
        products.push(k * vol);
    }
    let (slope, _, stderr) = linear_fit(&pts)?;
    let hi = products.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = products.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = hi / lo;
    let ok = (slope + 1.0).abs() <= 0.15 && ratio <= 3.0;
    let rec = CheckRecord::verdict(
        "resolvent_volume",
        "resolvent kernel and ball volume: a |B_C(x;r)| >= K_(I+r^2 H)^(-2m)(x;x)^(-1)",
        ok,
        Witness { indices: vec![x], t: None, values: vec![slope, ratio] },
    )
    .value(slope)
    .stderr(stderr)
    .margin(0.15 - (slope + 1.0).abs())
    .count(r_grid.len())
    .note(format!("product max/min {ratio:.4}, m = {m}"));
    Ok(CheckOutcome::new(vec![rec], vec![table]).stamp("resolvent_volume", started))
}

/// `(φ, e^{-tA} φ) / ‖φ‖₁²` for bumps of diameter `diameter` at `centers`.
/// Without separation the minimum must be at least `10⁻³` of the maximum;
/// with separation every value must be positive.
pub fn ondiagonal_lower_check(
    a: &DiscreteOperator,
    t: f64,
    diameter: f64,
    centers: &[Vec<f64>],
    separated: bool,
) -> Result<CheckOutcome> {
    let started = Instant::now();
    if centers.is_empty() || !(diameter > 0.0) {
        return Err(LabError::arg("on-diagonal check needs centers and a positive diameter"));
    }
    let mesh = a.mesh();
    let vol = mesh.cell_volume();
    let mut table = Table::new("ondiagonal", &["center", "value"]);
    let mut values = Vec::new();
    for (k, c) in centers.iter().enumerate() {
        let phi = bump(mesh, c, 0.5 * diameter);
        let l1 = phi.iter().sum::<f64>() * vol;
        if l1 == 0.0 {
            return Err(LabError::arg(format!("bump at {c:?} misses every grid point")));
        }
        let u = heat_evolve(a, &phi, t, HeatBackend::ChebyshevExp)?.values;
        let v = inner(&phi, &u, vol) / (l1 * l1);
        table.push(vec![k as f64, v]);
        values.push(v);
    }
    let (kmin, min) = values.iter().cloned().enumerate().fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    let max = values.iter().cloned().fold(0.0, f64::max);
    let anchor = "on-diagonal lower bound (phi, S_t phi) >= a' |phi|_1^2";
    let witness = Witness { indices: vec![kmin], t: Some(t), values: vec![min, max] };
    let rec = if separated {
        CheckRecord::verdict("ondiagonal_lower", anchor, min > 0.0, witness)
            .value(min / max)
            .note("separated: only positivity is required; uniformity may fail near the cut")
    } else {
        CheckRecord::verdict("ondiagonal_lower", anchor, min >= 1e-3 * max, witness).value(min / max).margin(min / max - 1e-3)
    };
    Ok(CheckOutcome::new(vec![rec.count(values.len())], vec![table]).stamp("ondiagonal", started))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::CoefficientProfile;
    use crate::grid::{assemble, Mesh};
    use crate::metric::distance_field;

    #[test]
    fn laplacian_decay_and_uniformity() {
        let p = CoefficientProfile::laplacian(1, vec![[-8.0, 8.0]]).unwrap();
        let mesh = Mesh::interval(-8.0, 8.0, 1024).unwrap();
        let a = assemble(&p, &mesh, 0.0).unwrap();
        let strat = SampleStrategy::Interior { margin: 3.0, stride: 8 };
        let ts: Vec<f64> = (0..8).map(|k| 0.01 * 10f64.powf(k as f64 / 7.0)).collect();
        let out = smalltime_decay_fit(&a, &ts, 1.0, 1.0, &strat).unwrap();
        let rec = &out.records[0];
        assert_eq!(rec.status, Status::Holds);
        assert!((rec.value.unwrap() + 0.5).abs() < 0.03, "{:?}", rec.value);
        let centers: Vec<Vec<f64>> = (-4..=4).map(|k| vec![k as f64 * 0.5]).collect();
        let out = ondiagonal_lower_check(&a, 1.0, 0.5, &centers, false).unwrap();
        assert!(out.records[0].value.unwrap() >= 0.9);
        let out = largetime_floor_check(&a, FloorMode::Gaussian, &[1.0, 2.0, 4.0], &strat).unwrap();
        assert!(out.all_hold(), "{:?}", out.records);
    }

    #[test]
    fn laplacian_resolvent_slope() {
        let p = CoefficientProfile::laplacian(1, vec![[-8.0, 8.0]]).unwrap();
        let mesh = Mesh::interval(-8.0, 8.0, 2048).unwrap();
        let a = assemble(&p, &mesh, 0.0).unwrap();
        let f = distance_field(&p, &mesh, &[0.0], 0.0).unwrap();
        let radii = crate::metric::log_space(0.05, 1.5, 12);
        let out = resolvent_volume_scaling(&a, &f, &radii, 1).unwrap();
        assert!((out.records[0].value.unwrap() + 1.0).abs() < 0.1, "{:?}", out.records[0]);
        assert!(out.all_hold());
        // Continuum oracle: ‖(I + r²Δ)^{-1} δ‖² = ∫ (e^{-|x|/r}/(2r))² = 1/(4r).
        let k = out.table("resolvent_volume").unwrap().column("kernel").unwrap();
        for (r, kr) in radii.iter().zip(k) {
            assert!((kr - 0.25 / r).abs() < 0.02 * 0.25 / r, "{r} {kr}");
        }
        assert!(resolvent_volume_scaling(&a, &f, &radii, 0).is_err());
    }
}
