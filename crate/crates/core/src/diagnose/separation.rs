use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{bump, norm2, smooth_random_fields, CheckOutcome, CheckRecord, Status, Table, Witness};
use crate::coeffs::{CoefficientProfile, QuadratureConfig, Verdict};
use crate::error::{LabError, Result};
use crate::evolve::{heat_evolve, HeatBackend};
use crate::grid::{assemble, cut_conductance, AssemblyOptions, DiscreteOperator, Mesh};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparationConfig {
    /// Candidate cut point; must be a mesh node at every level.
    pub cut: f64,
    #[serde(rename = "box")]
    pub bbox: [f64; 2],
    pub t: f64,
    /// Cell counts, one per refinement level, each double the previous.
    pub levels: Vec<usize>,
    /// Extra viscosity levels; `0` is always probed.
    #[serde(default)]
    pub epsilons: Vec<f64>,
    /// Backward Euler time step.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Half width of the window for the series conductance.
    #[serde(default = "default_window")]
    pub window: f64,
    /// Initial bump, centered `bump_offset` left of the cut.
    #[serde(default = "default_bump_offset")]
    pub bump_offset: f64,
    #[serde(default = "default_bump_radius")]
    pub bump_radius: f64,
}

fn default_dt() -> f64 {
    1.0 / 64.0
}

fn default_window() -> f64 {
    1.0
}

fn default_bump_offset() -> f64 {
    0.5
}

fn default_bump_radius() -> f64 {
    0.4
}

impl SeparationConfig {
    /// Levels `h = 2^-k_min .. 2^-k_max` on `bbox`.
    pub fn dyadic(cut: f64, bbox: [f64; 2], t: f64, k_min: u32, k_max: u32) -> Self {
        let len = bbox[1] - bbox[0];
        SeparationConfig {
            cut,
            bbox,
            t,
            levels: (k_min..=k_max).map(|k| (len * 2f64.powi(k as i32)).round() as usize).collect(),
            epsilons: Vec::new(),
            dt: default_dt(),
            window: default_window(),
            bump_offset: default_bump_offset(),
            bump_radius: default_bump_radius(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeparationVerdict {
    Separating,
    NonSeparating,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeakageRow {
    pub n: usize,
    pub h: f64,
    pub epsilon: f64,
    pub leakage: f64,
    pub conductance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationProbe {
    pub verdict: SeparationVerdict,
    pub rows: Vec<LeakageRow>,
    pub classifier: Verdict,
    pub outcome: CheckOutcome,
}

/// Mesh-refinement probe of separation across `cfg.cut`.
///
/// A bump left of the cut evolves by backward Euler (positivity is exact);
/// the leakage is the mass strictly right of the cut at time `t`. At `ε = 0`
/// the verdict is `NonSeparating` when the last two levels agree within 5%,
/// `Separating` when leakage falls strictly at every level and its ratio to
/// the series conductance stays within `[0.1, 10]` of the median, and
/// `Inconclusive` otherwise.
pub fn separation_probe(profile: &CoefficientProfile, cfg: &SeparationConfig) -> Result<SeparationProbe> {
    let started = Instant::now();
    if profile.dimension() != 1 {
        return Err(LabError::Unsupported("the separation probe runs on 1D profiles".into()));
    }
    if cfg.levels.len() < 2 || !(cfg.t > 0.0) || !(cfg.bbox[0] < cfg.cut && cfg.cut < cfg.bbox[1]) {
        return Err(LabError::arg("separation probe needs two or more levels, t > 0 and the cut inside the box"));
    }
    let mut epsilons = vec![0.0];
    epsilons.extend(cfg.epsilons.iter().copied().filter(|e| *e > 0.0));
    let mut rows = Vec::new();
    let mut table = Table::new("separation_leakage", &["n", "h", "epsilon", "leakage", "conductance", "ratio"]);
    for &n in &cfg.levels {
        let mesh = Mesh::interval(cfg.bbox[0], cfg.bbox[1], n)?;
        let h = mesh.h();
        let k = (cfg.cut - cfg.bbox[0]) / h;
        if (k - k.round()).abs() > 1e-9 * k.max(1.0) {
            return Err(LabError::arg(format!("cut {} is not a node of the {n}-cell mesh", cfg.cut)));
        }
        let phi0 = bump(&mesh, &[cfg.cut - cfg.bump_offset], cfg.bump_radius);
        let right: Vec<usize> = (0..mesh.len()).filter(|i| mesh.point(*i)[0] > cfg.cut + 0.5 * h).collect();
        for &eps in &epsilons {
            let a = assemble(profile, &mesh, eps)?;
            let u = heat_evolve(&a, &phi0, cfg.t, HeatBackend::BackwardEuler { dt: cfg.dt })?.values;
            let leakage = right.iter().map(|i| u[*i]).sum::<f64>() * mesh.cell_volume();
            let window = [(cfg.cut - cfg.window).max(cfg.bbox[0]), (cfg.cut + cfg.window).min(cfg.bbox[1])];
            let conductance = cut_conductance(profile, &mesh, window, eps, &AssemblyOptions::default())?;
            table.push(vec![n as f64, h, eps, leakage, conductance, leakage / conductance]);
            rows.push(LeakageRow { n, h, epsilon: eps, leakage, conductance });
        }
    }
    let base: Vec<&LeakageRow> = rows.iter().filter(|r| r.epsilon == 0.0).collect();
    let l: Vec<f64> = base.iter().map(|r| r.leakage).collect();
    let last = l[l.len() - 1];
    let prev = l[l.len() - 2];
    let stabilized = last > 0.0 && (last - prev).abs() <= 0.05 * prev.abs().max(last.abs());
    let decreasing = l.windows(2).all(|w| w[1] < w[0]);
    let ratios: Vec<f64> = base.iter().map(|r| r.leakage / r.conductance).collect();
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let bounded = median.is_finite() && ratios.iter().all(|q| *q >= 0.1 * median && *q <= 10.0 * median);
    let verdict = if stabilized {
        SeparationVerdict::NonSeparating
    } else if decreasing && bounded {
        SeparationVerdict::Separating
    } else {
        SeparationVerdict::Inconclusive
    };
    let anchor = "1D separation: a cut exists when the integral of 1/c diverges at a zero";
    let status = if verdict == SeparationVerdict::Inconclusive { Status::Inconclusive } else { Status::Fitted };
    let mut records = vec![CheckRecord::new("separation", anchor, status)
        .value(last)
        .count(l.len())
        .note(format!("{verdict:?}; leakage decreasing: {decreasing}, conductance ratio bounded: {bounded}"))];

    let classifier = profile.without_shift().classify(&QuadratureConfig::default())?.verdict;
    let agrees = match verdict {
        SeparationVerdict::Separating => classifier == Verdict::Separating,
        SeparationVerdict::NonSeparating => matches!(classifier, Verdict::ClosableDegenerate | Verdict::StronglyElliptic),
        SeparationVerdict::Inconclusive => false,
    };
    records.push(
        CheckRecord::verdict(
            "classifier_agreement",
            anchor,
            agrees,
            Witness { indices: vec![], t: Some(cfg.t), values: vec![last] },
        )
        .note(format!("classifier {classifier:?}, probe {verdict:?}")),
    );
    for &eps in epsilons.iter().skip(1) {
        let l: Vec<f64> = rows.iter().filter(|r| r.epsilon == eps).map(|r| r.leakage).collect();
        let ratio = l[l.len() - 1] / l[0];
        records.push(
            CheckRecord::verdict(
                &format!("viscosity_control_eps_{eps:e}"),
                "a strongly elliptic approximant never separates",
                ratio >= 0.5,
                Witness { indices: vec![], t: Some(cfg.t), values: vec![l[0], l[l.len() - 1]] },
            )
            .value(ratio),
        );
    }
    let outcome = CheckOutcome::new(records, vec![table]).stamp("separation", started);
    Ok(SeparationProbe { verdict, rows, classifier, outcome })
}

/// `max_φ ‖𝟙_{Ωᶜ} e^{-tA}(φ 𝟙_Ω)‖₂ / ‖φ 𝟙_Ω‖₂` over 16 seeded smooth `φ`;
/// holds below `tol`.
pub fn invariance_defect(a: &DiscreteOperator, omega: &[bool], t: f64, seed: u64, tol: f64) -> Result<CheckOutcome> {
    let started = Instant::now();
    check_mask(a, omega)?;
    let vol = a.mesh().cell_volume();
    let mut worst: f64 = 0.0;
    let mut table = Table::new("invariance", &["sample", "defect"]);
    for (k, phi) in smooth_random_fields(a, 16, seed).into_iter().enumerate() {
        let inside: Vec<f64> = phi.iter().zip(omega).map(|(v, m)| if *m { *v } else { 0.0 }).collect();
        let u = heat_evolve(a, &inside, t, HeatBackend::ChebyshevExp)?.values;
        let outside: Vec<f64> = u.iter().zip(omega).map(|(v, m)| if *m { 0.0 } else { *v }).collect();
        let d = norm2(&outside, vol) / norm2(&inside, vol).max(f64::MIN_POSITIVE);
        table.push(vec![k as f64, d]);
        worst = worst.max(d);
    }
    let rec = CheckRecord::verdict(
        "invariance",
        "invariance: S_t maps functions supported in Omega into functions supported in Omega",
        worst < tol,
        Witness { indices: vec![], t: Some(t), values: vec![worst] },
    )
    .value(worst)
    .margin(tol - worst)
    .count(16);
    Ok(CheckOutcome::new(vec![rec], vec![table]).stamp("invariance", started))
}

/// `max_φ |a(φ) − a(φ𝟙_Ω) − a(φ𝟙_{Ωᶜ})| / (1 + a(φ))` with `a(ψ) = ψᵀAψ`;
/// holds below `tol`.
pub fn form_additivity_defect(a: &DiscreteOperator, omega: &[bool], seed: u64, tol: f64) -> Result<CheckOutcome> {
    let started = Instant::now();
    check_mask(a, omega)?;
    let mut worst: f64 = 0.0;
    let mut table = Table::new("form_additivity", &["sample", "defect"]);
    for (k, phi) in smooth_random_fields(a, 16, seed).into_iter().enumerate() {
        let split = |keep: bool| -> Vec<f64> { phi.iter().zip(omega).map(|(v, m)| if *m == keep { *v } else { 0.0 }).collect() };
        let full = a.quadratic_form(&phi);
        let d = (full - a.quadratic_form(&split(true)) - a.quadratic_form(&split(false))).abs() / (1.0 + full);
        table.push(vec![k as f64, d]);
        worst = worst.max(d);
    }
    let rec = CheckRecord::verdict(
        "form_additivity",
        "the Dirichlet form splits additively over Omega and its complement",
        worst < tol,
        Witness { indices: vec![], t: None, values: vec![worst] },
    )
    .value(worst)
    .margin(tol - worst)
    .count(16);
    Ok(CheckOutcome::new(vec![rec], vec![table]).stamp("form_additivity", started))
}

fn check_mask(a: &DiscreteOperator, omega: &[bool]) -> Result<()> {
    if omega.len() != a.size() {
        return Err(LabError::arg(format!("mask has length {}, operator size {}", omega.len(), a.size())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn form_cross_energy_identity() {
        // a(φ) − a(φ𝟙_Ω) − a(φ𝟙_{Ωᶜ}) = −2 Σ_{cross faces} g φᵢ φⱼ.
        let p = CoefficientProfile::laplacian(1, vec![[0.0, 1.0]]).unwrap();
        let mesh = Mesh::interval(0.0, 1.0, 8).unwrap();
        let a = assemble(&p, &mesh, 0.0).unwrap();
        let omega = mesh.mask(|x| x[0] < 0.3);
        let phi: Vec<f64> = (0..mesh.len()).map(|i| 1.0 + 0.1 * i as f64).collect();
        let split = |keep: bool| -> Vec<f64> { phi.iter().zip(&omega).map(|(v, m)| if *m == keep { *v } else { 0.0 }).collect() };
        let lhs = a.quadratic_form(&phi) - a.quadratic_form(&split(true)) - a.quadratic_form(&split(false));
        let g = 64.0;
        let rhs = -2.0 * g * phi[2] * phi[3];
        assert!((lhs - rhs).abs() < 1e-10 * rhs.abs(), "{lhs} {rhs}");
    }

    #[test]
    fn exact_cut_is_invariant_and_additive() {
        let p = CoefficientProfile::power_1d(0.75, &[0.0], [-1.0, 1.0]).unwrap();
        let mesh = Mesh::interval(-1.0, 1.0, 17).unwrap();
        let a = assemble(&p, &mesh, 0.0).unwrap();
        let omega = mesh.mask(|x| x[0] < 0.0);
        assert!(invariance_defect(&a, &omega, 0.5, 3, 1e-10).unwrap().all_hold());
        assert!(form_additivity_defect(&a, &omega, 3, 1e-12).unwrap().all_hold());
        let l = assemble(&CoefficientProfile::laplacian(1, vec![[-1.0, 1.0]]).unwrap(), &mesh, 0.0).unwrap();
        let out = form_additivity_defect(&l, &omega, 3, 1e-12).unwrap();
        assert!(out.records[0].value.unwrap() > 0.01);
        assert!(out.any_violated());
    }

    #[test]
    fn probe_dichotomy_small() {
        let sep = CoefficientProfile::power_1d(0.75, &[0.0], [-4.0, 4.0]).unwrap();
        let mut cfg = SeparationConfig::dyadic(0.0, [-4.0, 4.0], 1.0, 6, 11);
        cfg.epsilons = vec![1e-2];
        let probe = separation_probe(&sep, &cfg).unwrap();
        assert_eq!(probe.verdict, SeparationVerdict::Separating, "{:?}", probe.rows);
        assert!(probe.outcome.record("classifier_agreement").unwrap().status == Status::Holds);
        assert!(probe.outcome.records.iter().all(|r| r.status != Status::Violated), "{:?}", probe.outcome.records);
        let closable = CoefficientProfile::power_1d(0.25, &[0.0], [-4.0, 4.0]).unwrap();
        let probe = separation_probe(&closable, &SeparationConfig::dyadic(0.0, [-4.0, 4.0], 1.0, 6, 12)).unwrap();
        assert_eq!(probe.verdict, SeparationVerdict::NonSeparating, "{:?}", probe.rows);
    }
}
