//! One-dimensional quadrature used by the classifier and the metric.
//!
//! Three tools live here: fixed Gauss-Legendre rules, a globally adaptive
//! Gauss-Legendre integrator, and a dyadic tail study that decides whether
//! an integral with a singular endpoint converges.

use std::f64::consts::PI;

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = (n + 1) / 2;
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Globally adaptive Gauss-Legendre integration: the panel with the largest
/// local error estimate (one panel against its two halves) is split until the
/// summed estimate is below `rel_tol * |value|` or the panel budget runs out.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64, max_panels: usize) -> Integral {
    if a == b {
        return Integral { value: 0.0, error: 0.0, evaluations: 0 };
    }
    let rule = GaussLegendre::new(10);
    let mut evaluations = 0usize;
    let estimate = |f: &mut F, lo: f64, hi: f64, evals: &mut usize| -> (f64, f64) {
        let mid = 0.5 * (lo + hi);
        let whole = rule.integrate(&mut *f, lo, hi);
        let left = rule.integrate(&mut *f, lo, mid);
        let right = rule.integrate(&mut *f, mid, hi);
        *evals += 3 * rule.len();
        let refined = left + right;
        (refined, (refined - whole).abs())
    };

    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = estimate(&mut f, a, b, &mut evaluations);
    panels.push((a, b, v, e));
    loop {
        let value: f64 = panels.iter().map(|p| p.2).sum();
        let error: f64 = panels.iter().map(|p| p.3).sum();
        if !value.is_finite() || error <= rel_tol * value.abs() || error == 0.0 || panels.len() >= max_panels {
            return Integral { value, error, evaluations };
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Panel cannot be split further in floating point.
            let value: f64 = panels.iter().map(|p| p.2).sum::<f64>();
            let (v, e) = estimate(&mut f, lo, hi, &mut evaluations);
            return Integral { value: value + v, error: error.max(e), evaluations };
        }
        let (vl, el) = estimate(&mut f, lo, mid, &mut evaluations);
        let (vr, er) = estimate(&mut f, mid, hi, &mut evaluations);
        panels.push((lo, mid, vl, el));
        panels.push((mid, hi, vr, er));
    }
}

/// Integrates `f(d)` for the signed offset `d` running from 0 to `len`,
/// after the substitution `d = ±s^4`. This smooths integrands behaving like
/// `|d|^(-beta)` with `beta < 1`. Passing the offset rather than the point
/// keeps full relative precision next to the singularity.
pub fn graded<F: FnMut(f64) -> f64>(mut f: F, len: f64, rel_tol: f64) -> Integral {
    if len == 0.0 {
        return Integral { value: 0.0, error: 0.0, evaluations: 0 };
    }
    let sign = len.signum();
    let s_max = len.abs().powf(0.25);
    adaptive(
        |s| {
            let s3 = s * s * s;
            let d = s3 * s;
            if d == 0.0 {
                0.0
            } else {
                4.0 * s3 * f(sign * d)
            }
        },
        0.0,
        s_max,
        rel_tol,
        4000,
    )
}

/// Outcome of a dyadic tail study.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum TailVerdict {
    Converges { value: f64 },
    Diverges,
    Ambiguous,
}

/// Partial integrals `I(eta)` of `f(d)` over signed offsets `d` with
/// `eta <= |d| <= |alpha|` on the side of `alpha`, for `eta = |alpha| 2^-k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailStudy {
    pub etas: Vec<f64>,
    pub partials: Vec<f64>,
    pub verdict: TailVerdict,
}

/// Thresholds of the tail test. Consecutive dyadic increments of an integrand
/// `|z - z0|^(-beta)` have ratio `2^(beta - 1)`: below one for integrable
/// singularities, one for the logarithmic case, above one otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailConfig {
    pub min_levels: usize,
    pub max_levels: usize,
    pub diverge_ratio: f64,
    pub converge_ratio: f64,
    pub tail_tol: f64,
}

impl Default for TailConfig {
    fn default() -> Self {
        TailConfig { min_levels: 12, max_levels: 60, diverge_ratio: 0.995, converge_ratio: 0.98, tail_tol: 1e-6 }
    }
}

pub fn dyadic_tail<F: FnMut(f64) -> f64>(mut f: F, alpha: f64, cfg: &TailConfig) -> TailStudy {
    let rule = GaussLegendre::new(12);
    let sign = alpha.signum();
    let width = alpha.abs();
    let mut etas = Vec::new();
    let mut partials = Vec::new();
    let mut increments: Vec<f64> = Vec::new();

    let mut panel = |lo: f64, hi: f64| -> f64 {
        // Two sub-panels per dyadic level keep the rule accurate for steep powers.
        let mid = 0.5 * (lo + hi);
        let g = |f: &mut F, a: f64, b: f64| rule.integrate(|e| f(sign * e), a, b);
        g(&mut f, lo, mid) + g(&mut f, mid, hi)
    };

    let mut eta = 0.5 * width;
    let mut total = panel(eta, width);
    etas.push(eta);
    partials.push(total);
    for level in 1..=cfg.max_levels {
        let next = 0.5 * eta;
        let inc = panel(next, eta);
        if !inc.is_finite() {
            return TailStudy { etas, partials, verdict: TailVerdict::Diverges };
        }
        eta = next;
        total += inc;
        etas.push(eta);
        partials.push(total);
        increments.push(inc);
        if level < cfg.min_levels || increments.len() < 4 {
            continue;
        }
        let n = increments.len();
        let ratios: Vec<f64> = (n - 3..n).map(|i| increments[i] / increments[i - 1]).collect();
        if ratios.iter().all(|r| *r >= cfg.diverge_ratio) {
            return TailStudy { etas, partials, verdict: TailVerdict::Diverges };
        }
        let rho = ratios[2];
        if ratios.iter().all(|r| *r <= cfg.converge_ratio) && rho > 0.0 {
            let tail = inc * rho / (1.0 - rho);
            // Error of the geometric tail sum from the drift of the ratio.
            let drift = (ratios[2] - ratios[1]).abs().max((ratios[1] - ratios[0]).abs());
            let tail_error = tail.min(tail * drift / (1.0 - rho).powi(2));
            if tail_error <= cfg.tail_tol * total.abs() {
                return TailStudy { etas, partials, verdict: TailVerdict::Converges { value: total + tail } };
            }
        }
        if inc == 0.0 && increments[n - 2] == 0.0 {
            return TailStudy { etas, partials, verdict: TailVerdict::Converges { value: total } };
        }
    }
    TailStudy { etas, partials, verdict: TailVerdict::Ambiguous }
}

/// Golden-section search for a minimum of `f` on `[a, b]`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, iterations: usize) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iterations {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        if !(b - a > 0.0) || c <= a || d >= b {
            break;
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let rule = GaussLegendre::new(8);
        // degree 15 is integrated exactly by 8 nodes
        let v = rule.integrate(|x| x.powi(14) + 3.0 * x.powi(3), -1.0, 1.0);
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
        let w: f64 = rule.weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn graded_handles_integrable_singularity() {
        // ∫_0^1 z^(-3/4) dz = 4
        let r = graded(|d| d.powf(-0.75), 1.0, 1e-12);
        assert!((r.value - 4.0).abs() < 1e-10, "{r:?}");
        let r = graded(|d: f64| (-d).powf(-0.5), -1.0, 1e-12);
        assert!((r.value - 2.0).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn tail_study_separates_power_laws() {
        let cfg = TailConfig::default();
        let conv = dyadic_tail(|d| d.powf(-0.5), 1.0, &cfg);
        match conv.verdict {
            TailVerdict::Converges { value } => assert!((value - 2.0).abs() < 1e-5, "{value}"),
            v => panic!("expected convergence, got {v:?}"),
        }
        assert_eq!(dyadic_tail(|d| 1.0 / d, 1.0, &cfg).verdict, TailVerdict::Diverges);
        assert_eq!(dyadic_tail(|d| d.powf(-1.5), 1.0, &cfg).verdict, TailVerdict::Diverges);
        assert_eq!(dyadic_tail(|d: f64| (-d).powf(-1.2), -0.5, &cfg).verdict, TailVerdict::Diverges);
    }

    #[test]
    fn golden_section_finds_cusp() {
        let (x, v) = golden_min(|x| (x - 0.3).abs().powf(0.2), 0.0, 1.0, 200);
        assert!((x - 0.3).abs() < 1e-12);
        assert!(v < 1e-2);
    }
}
