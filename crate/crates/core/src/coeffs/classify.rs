//! Numerical classification of a coefficient profile.
//!
//! Zeros of `μ_m` are located by a scan and golden-section refinement. Around
//! each zero the integrals of `μ_m^-1` and `μ_m^-1/2` over shrinking one-sided
//! neighbourhoods are studied with [`dyadic_tail`]: a divergent `∫ μ_m^-1` on
//! either side marks a cut.

use serde::{Deserialize, Serialize};

use super::{degenerate_profile, CoefficientProfile, Family};
use crate::error::{LabError, Result};
use crate::quad::{dyadic_tail, golden_min, TailConfig, TailVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    StronglyElliptic,
    ClosableDegenerate,
    Separating,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ZeroSite {
    Point(f64),
    /// `μ_m` vanishes identically on the interval.
    Interval(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrabilityRow {
    pub zero: f64,
    pub side: Side,
    pub alpha: f64,
    pub inverse: TailVerdict,
    pub inverse_sqrt: TailVerdict,
    /// Last partial integral of `μ_m^-1` and the `η` it was taken at.
    pub last_partial: f64,
    pub last_eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub cut_points: Vec<f64>,
    pub mu_lower: f64,
    pub zeros: Vec<ZeroSite>,
    pub integrability_table: Vec<IntegrabilityRow>,
    /// Coordinate the locations refer to: `x`, `radius`, or `normal_offset`.
    pub coordinate: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureConfig {
    pub scan_points: usize,
    pub merge_fraction: f64,
    pub strong_ellipticity_threshold: f64,
    pub golden_iterations: usize,
    pub max_alpha: f64,
    pub tail: TailConfig,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            scan_points: 10_000,
            merge_fraction: 1e-3,
            strong_ellipticity_threshold: 1e-8,
            golden_iterations: 300,
            max_alpha: 1.0,
            tail: TailConfig::default(),
        }
    }
}

impl CoefficientProfile {
    /// Decides strong ellipticity, closability, and separation candidacy.
    ///
    /// One-dimensional profiles are classified directly. Radial shells and
    /// surface degeneracies reduce to their normal profile; point
    /// degeneracies in 2D use the area-weighted integrand `ρ/μ_m(ρ)`.
    pub fn classify(&self, cfg: &QuadratureConfig) -> Result<Classification> {
        let eps = self.epsilon();
        if self.dimension() == 1 {
            let [a, b] = self.domain()[0];
            return Ok(classify_line(|s| self.smallest_eigenvalue_unchecked(&[s]), a, b, false, "x", cfg));
        }
        let far = self
            .domain()
            .iter()
            .map(|iv| iv[0].abs().max(iv[1].abs()))
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        match self.family() {
            Family::StronglyElliptic { matrix } => {
                let mu = matrix.shifted(eps).smallest_eigenvalue();
                Ok(Classification {
                    verdict: if mu > cfg.strong_ellipticity_threshold { Verdict::StronglyElliptic } else { Verdict::Inconclusive },
                    cut_points: Vec::new(),
                    mu_lower: mu,
                    zeros: Vec::new(),
                    integrability_table: Vec::new(),
                    coordinate: "x",
                })
            }
            Family::RadialShell { delta, radius } => {
                let (delta, radius) = (*delta, *radius);
                Ok(classify_line(|r| degenerate_profile((r - radius).abs(), delta) + eps, 0.0, far.max(2.0 * radius), false, "radius", cfg))
            }
            Family::SurfaceDegenerate { delta, .. } => {
                let delta = *delta;
                let height = self.domain()[1][1] - self.domain()[1][0];
                Ok(classify_line(|s| degenerate_profile(s.abs(), delta) + eps, -height, height, false, "normal_offset", cfg))
            }
            Family::PowerDegenerate { delta, .. } => {
                let delta = *delta;
                Ok(classify_line(|r| degenerate_profile(r, delta) + eps, 0.0, far, true, "radius", cfg))
            }
            Family::Sampled(_) => Err(LabError::Unsupported(
                "classification of two-dimensional sampled fields has no normal profile to reduce to".into(),
            )),
        }
    }
}

fn classify_line<F: Fn(f64) -> f64>(
    mu: F,
    a: f64,
    b: f64,
    area_weighted: bool,
    coordinate: &'static str,
    cfg: &QuadratureConfig,
) -> Classification {
    let n = cfg.scan_points.max(16);
    let step = (b - a) / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| a + step * i as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|x| mu(*x)).collect();
    let mut scan_min = vals.iter().copied().fold(f64::INFINITY, f64::min);

    let mut zeros: Vec<ZeroSite> = Vec::new();
    let mut in_run: Vec<bool> = vec![false; n + 1];
    let mut i = 0;
    while i <= n {
        if vals[i] <= 0.0 {
            let start = i;
            while i < n && vals[i + 1] <= 0.0 {
                i += 1;
            }
            if i > start {
                for flag in in_run.iter_mut().take(i + 1).skip(start) {
                    *flag = true;
                }
                zeros.push(ZeroSite::Interval(xs[start], xs[i]));
            }
        }
        i += 1;
    }

    let mut refined_min = f64::INFINITY;
    for i in 0..=n {
        if in_run[i] {
            continue;
        }
        let left = if i > 0 { vals[i - 1] } else { f64::INFINITY };
        let right = if i < n { vals[i + 1] } else { f64::INFINITY };
        let v = vals[i];
        if !(v <= left && v <= right && (v < left || v < right)) {
            continue;
        }
        let lo = if i > 0 { xs[i - 1] } else { xs[i] };
        let hi = if i < n { xs[i + 1] } else { xs[i] };
        let (z, vz) = if hi > lo { golden_min(&mu, lo, hi, cfg.golden_iterations) } else { (xs[i], v) };
        let (z, vz) = if vz <= v { (z, vz) } else { (xs[i], v) };
        refined_min = refined_min.min(vz);
        let bracket = (hi - lo) * GOLDEN_SHRINK.powi(cfg.golden_iterations as i32);
        if is_zero(&mu, z, vz, bracket, a, b, cfg.strong_ellipticity_threshold) {
            zeros.push(ZeroSite::Point(z));
        }
    }
    scan_min = scan_min.min(refined_min);

    // Merge nearby point zeros.
    let merge = cfg.merge_fraction * (b - a);
    zeros.sort_by(|p, q| site_start(p).total_cmp(&site_start(q)));
    let mut merged: Vec<ZeroSite> = Vec::new();
    for z in zeros {
        match (merged.last(), z) {
            (Some(ZeroSite::Point(p)), ZeroSite::Point(q)) if (q - p).abs() < merge => {}
            (Some(ZeroSite::Interval(_, hi)), ZeroSite::Point(q)) if q - hi < merge => {}
            _ => merged.push(z),
        }
    }
    let zeros = merged;

    let mu_lower = if zeros.is_empty() { scan_min.max(0.0) } else { 0.0 };
    let mut table = Vec::new();
    let mut cuts = Vec::new();
    let mut ambiguous = false;
    for (k, site) in zeros.iter().enumerate() {
        let (z_lo, z_hi) = match *site {
            ZeroSite::Point(z) => (z, z),
            ZeroSite::Interval(lo, hi) => {
                // The integrand is infinite on a set of positive measure.
                cuts.push(lo);
                cuts.push(hi);
                continue;
            }
        };
        let prev = if k > 0 { site_end(&zeros[k - 1]) } else { a };
        let next = zeros.get(k + 1).map(site_start).unwrap_or(b);
        let gap_left = if k > 0 { 0.5 * (z_lo - prev) } else { z_lo - a };
        let gap_right = if k + 1 < zeros.len() { 0.5 * (next - z_hi) } else { b - z_hi };
        let mut diverges = false;
        for (side, alpha) in [(Side::Left, -gap_left.min(cfg.max_alpha)), (Side::Right, gap_right.min(cfg.max_alpha))] {
            if alpha.abs() <= 0.0 || (area_weighted && side == Side::Left) {
                continue;
            }
            let weight = |d: f64| if area_weighted { d.abs() } else { 1.0 };
            let inv = dyadic_tail(|d| weight(d) / mu(z_lo + d), alpha, &cfg.tail);
            let inv_sqrt = dyadic_tail(|d| weight(d) / mu(z_lo + d).sqrt(), alpha, &cfg.tail);
            if inv.verdict == TailVerdict::Diverges {
                diverges = true;
            }
            if inv.verdict == TailVerdict::Ambiguous {
                ambiguous = true;
            }
            table.push(IntegrabilityRow {
                zero: z_lo,
                side,
                alpha: alpha.abs(),
                inverse: inv.verdict,
                inverse_sqrt: inv_sqrt.verdict,
                last_partial: *inv.partials.last().unwrap_or(&0.0),
                last_eta: *inv.etas.last().unwrap_or(&0.0),
            });
        }
        if diverges {
            cuts.push(z_lo);
        }
    }

    let verdict = if !cuts.is_empty() {
        Verdict::Separating
    } else if ambiguous {
        Verdict::Inconclusive
    } else if !zeros.is_empty() {
        Verdict::ClosableDegenerate
    } else if mu_lower > cfg.strong_ellipticity_threshold {
        Verdict::StronglyElliptic
    } else {
        Verdict::Inconclusive
    };
    Classification { verdict, cut_points: cuts, mu_lower, zeros, integrability_table: table, coordinate }
}

const GOLDEN_SHRINK: f64 = 0.618_033_988_749_894_8;

fn site_start(s: &ZeroSite) -> f64 {
    match *s {
        ZeroSite::Point(z) => z,
        ZeroSite::Interval(lo, _) => lo,
    }
}

fn site_end(s: &ZeroSite) -> f64 {
    match *s {
        ZeroSite::Point(z) => z,
        ZeroSite::Interval(_, hi) => hi,
    }
}

/// A refined local minimum is a zero when it is exactly zero or when `μ_m`
/// keeps falling like a power of the distance down to the finest offset the
/// refinement resolved. `bracket` is the final golden-section bracket width.
fn is_zero<F: Fn(f64) -> f64>(mu: &F, z: f64, vz: f64, bracket: f64, a: f64, b: f64, threshold: f64) -> bool {
    if vz <= 0.0 {
        return true;
    }
    let probe = |eta: f64| -> f64 {
        let mut m = f64::INFINITY;
        if z + eta <= b {
            m = m.min(mu(z + eta));
        }
        if z - eta >= a {
            m = m.min(mu(z - eta));
        }
        m
    };
    let eta_min = (1e3 * bracket).max(1e-12 * z.abs()).max(1e-300);
    let eta_far = 1e4 * eta_min;
    if eta_far > 1e-2 * (b - a) {
        return vz <= threshold;
    }
    let (near, far) = (probe(eta_min), probe(eta_far));
    if near <= 0.0 {
        return true;
    }
    if !(near.is_finite() && far.is_finite()) {
        return false;
    }
    (far.ln() - near.ln()) / 1e4f64.ln() >= 0.02
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{SampledField, SurfaceCurve, SymMat};

    fn classify_power(delta: f64) -> Classification {
        CoefficientProfile::power_1d(delta, &[0.0], [-4.0, 4.0]).unwrap().classify(&QuadratureConfig::default()).unwrap()
    }

    #[test]
    fn three_quarters_separates_at_origin() {
        let c = classify_power(0.75);
        assert_eq!(c.verdict, Verdict::Separating);
        assert_eq!(c.cut_points.len(), 1);
        assert!(c.cut_points[0].abs() < 1e-9);
        assert_eq!(c.mu_lower, 0.0);
    }

    #[test]
    fn quarter_is_closable_with_finite_integral() {
        let c = classify_power(0.25);
        assert_eq!(c.verdict, Verdict::ClosableDegenerate);
        assert!(c.cut_points.is_empty());
        // Oracle: ∫_0^1 ((1+z²)/z²)^{1/4} dz, computed by the graded rule.
        let oracle = crate::quad::graded(|z| ((1.0 + z * z) / (z * z)).powf(0.25), 1.0, 1e-12).value;
        // Sanity of the oracle against the leading term ∫ z^{-1/2} = 2.
        assert!(oracle > 2.0 && oracle < 2.2);
        let right = c.integrability_table.iter().find(|r| r.side == Side::Right).unwrap();
        match right.inverse {
            TailVerdict::Converges { value } => assert!((value - oracle).abs() < 1e-5 * oracle, "{value} vs {oracle}"),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn delta_zero_is_strongly_elliptic() {
        let c = classify_power(0.0);
        assert_eq!(c.verdict, Verdict::StronglyElliptic);
        assert!(c.zeros.is_empty());
        assert!((c.mu_lower - 1.0).abs() < 1e-12);
    }

    #[test]
    fn delta_threshold_table() {
        for d in [0.5, 0.6, 0.75, 0.9] {
            let c = classify_power(d);
            assert_eq!(c.verdict, Verdict::Separating, "delta {d}");
            assert!(!c.cut_points.is_empty());
        }
        for d in [0.1, 0.25, 0.4] {
            let c = classify_power(d);
            assert_eq!(c.verdict, Verdict::ClosableDegenerate, "delta {d}");
            assert!(c.cut_points.is_empty());
        }
    }

    #[test]
    fn double_zero_has_two_cuts() {
        let p = CoefficientProfile::power_1d(0.75, &[-1.0, 1.0], [-4.0, 4.0]).unwrap();
        let c = p.classify(&QuadratureConfig::default()).unwrap();
        assert_eq!(c.verdict, Verdict::Separating);
        assert_eq!(c.cut_points.len(), 2);
        assert!((c.cut_points[0] + 1.0).abs() < 1e-9 && (c.cut_points[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn viscosity_shift_restores_strong_ellipticity() {
        for d in [0.1, 0.5, 0.75, 0.9] {
            let p = CoefficientProfile::power_1d(d, &[0.0], [-4.0, 4.0]).unwrap();
            for eps in [1e-4, 1e-2] {
                let c = p.viscosity_shift(eps).unwrap().classify(&QuadratureConfig::default()).unwrap();
                assert_eq!(c.verdict, Verdict::StronglyElliptic, "delta {d} eps {eps}");
                assert!((c.mu_lower - eps).abs() < 1e-9 * (1.0 + eps));
            }
        }
    }

    #[test]
    fn multi_dimensional_families_reduce_to_normal_profile() {
        let cfg = QuadratureConfig::default();
        let shell = CoefficientProfile::new(2, Family::RadialShell { delta: 0.75, radius: 1.0 }, vec![[-2.0, 2.0]; 2]).unwrap();
        let c = shell.classify(&cfg).unwrap();
        assert_eq!(c.verdict, Verdict::Separating);
        assert!((c.cut_points[0] - 1.0).abs() < 1e-9);
        assert_eq!(c.coordinate, "radius");

        let surf = SurfaceCurve::new([-1.0, 1.0], vec![0.0, 0.2, 0.0]).unwrap();
        let s = CoefficientProfile::new(2, Family::SurfaceDegenerate { delta: 0.25, surface: surf }, vec![[-1.0, 1.0]; 2]).unwrap();
        assert_eq!(s.classify(&cfg).unwrap().verdict, Verdict::ClosableDegenerate);

        let point = CoefficientProfile::new(
            2,
            Family::PowerDegenerate { delta: 0.75, centers: vec![vec![0.0, 0.0]] },
            vec![[-1.0, 1.0]; 2],
        )
        .unwrap();
        // A point cannot separate the plane: ∫ ρ^{1-2δ} dρ converges.
        assert_eq!(point.classify(&cfg).unwrap().verdict, Verdict::ClosableDegenerate);
    }

    #[test]
    fn zero_plateau_separates() {
        let values: Vec<SymMat> = [1.0, 0.5, 0.0, 0.0, 0.0, 0.5, 1.0].iter().map(|c| SymMat::scalar(1, *c)).collect();
        let field = SampledField::new(vec![7], values).unwrap();
        let p = CoefficientProfile::new(1, Family::Sampled(field), vec![[-3.0, 3.0]]).unwrap();
        let c = p.classify(&QuadratureConfig::default()).unwrap();
        assert_eq!(c.verdict, Verdict::Separating);
        assert!(matches!(c.zeros[0], ZeroSite::Interval(lo, hi) if (lo + 1.0).abs() < 1e-3 && (hi - 1.0).abs() < 1e-3));
    }

    #[test]
    fn sampled_linear_zero_is_closable() {
        // c ~ |x| near the node: ∫ c^-1 diverges logarithmically.
        let values: Vec<SymMat> = [1.0, 0.5, 0.0, 0.5, 1.0].iter().map(|c| SymMat::scalar(1, *c)).collect();
        let field = SampledField::new(vec![5], values).unwrap();
        let p = CoefficientProfile::new(1, Family::Sampled(field), vec![[-2.0, 2.0]]).unwrap();
        assert_eq!(p.classify(&QuadratureConfig::default()).unwrap().verdict, Verdict::Separating);
    }
}
