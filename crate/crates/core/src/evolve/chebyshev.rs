//! Chebyshev expansion of `e^{-tA} v` on the Gershgorin interval `[lo, hi]`.
//!
//! With `B = (2A - (hi + lo)) / (hi - lo)` and `α = t (hi - lo) / 2`,
//! `e^{-tA} = e^{-t lo} [s_0 + 2 Σ_k (-1)^k s_k T_k(B)]` where
//! `s_k = e^{-α} I_k(α)`. The `s_k` are normalized so that
//! `s_0 + 2 Σ s_k = 1`; on a zero-row-sum matrix with `lo = 0` this makes the
//! expansion conserve mass up to rounding.

use crate::grid::DiscreteOperator;

/// Scaled modified Bessel values `e^{-α} I_k(α)` for `k = 0..`, by Miller's
/// backward recurrence, truncated once the remaining tail `2 Σ s_k` is below
/// `tail_tol`.
pub fn scaled_bessel(alpha: f64, tail_tol: f64) -> Vec<f64> {
    if alpha == 0.0 {
        return vec![1.0];
    }
    let start = (15.0 * alpha.sqrt() + 60.0).ceil() as usize;
    let mut s = vec![0.0; start + 2];
    s[start] = 1e-300;
    for k in (1..=start).rev() {
        s[k - 1] = s[k + 1] + (2.0 * k as f64 / alpha) * s[k];
        if s[k - 1] > 1e250 {
            for v in s[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let total = s[0] + 2.0 * s[1..].iter().sum::<f64>();
    for v in s.iter_mut() {
        *v /= total;
    }
    let mut tail = 0.0;
    let mut keep = s.len();
    for k in (1..s.len()).rev() {
        tail += 2.0 * s[k];
        if tail >= tail_tol {
            keep = k + 1;
            break;
        }
        keep = k;
    }
    s.truncate(keep.max(1));
    s
}

/// One Chebyshev action without substepping.
pub fn apply(a: &DiscreteOperator, v: &[f64], t: f64, bounds: (f64, f64), tail_tol: f64) -> Vec<f64> {
    let (lo, hi) = bounds;
    let n = v.len();
    let damp = (-t * lo).exp();
    if hi - lo <= 0.0 || t == 0.0 {
        return v.iter().map(|x| x * damp).collect();
    }
    let alpha = 0.5 * t * (hi - lo);
    let s = scaled_bessel(alpha, tail_tol);
    let scale = 2.0 / (hi - lo);
    let shift = (hi + lo) / (hi - lo);
    let mut y: Vec<f64> = v.iter().map(|x| s[0] * x).collect();
    if s.len() == 1 {
        return y.iter().map(|x| x * damp).collect();
    }
    let mut prev = v.to_vec();
    let mut av = vec![0.0; n];
    a.apply(v, &mut av);
    let mut cur: Vec<f64> = (0..n).map(|i| scale * av[i] - shift * v[i]).collect();
    for (i, yi) in y.iter_mut().enumerate() {
        *yi -= 2.0 * s[1] * cur[i];
    }
    let mut next = vec![0.0; n];
    for (k, sk) in s.iter().enumerate().skip(2) {
        a.apply(&cur, &mut av);
        for i in 0..n {
            next[i] = 2.0 * (scale * av[i] - shift * cur[i]) - prev[i];
        }
        let c = if k % 2 == 0 { 2.0 * sk } else { -2.0 * sk };
        for i in 0..n {
            y[i] += c * next[i];
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    for yi in y.iter_mut() {
        *yi *= damp;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_small_argument_series() {
        // e^{-1} I_k(1) from the power series.
        let s = scaled_bessel(1.0, 1e-18);
        let series = |k: i32| -> f64 {
            let mut term = 0.5f64.powi(k) / (1..=k).map(|j| j as f64).product::<f64>();
            let mut sum = 0.0;
            for m in 0..40 {
                sum += term;
                term *= 0.25 / ((m + 1) as f64 * (m + 1 + k) as f64);
            }
            sum * (-1.0f64).exp()
        };
        for k in 0..8 {
            assert!((s[k as usize] - series(k)).abs() < 1e-15, "k {k}");
        }
    }

    #[test]
    fn bessel_large_argument_asymptotics() {
        // e^{-α} I_0(α) ≈ (2πα)^{-1/2} (1 + 1/(8α) + 9/(128 α²)).
        let alpha = 1e4;
        let s = scaled_bessel(alpha, 1e-18);
        let asym = (2.0 * std::f64::consts::PI * alpha).powf(-0.5) * (1.0 + 1.0 / (8.0 * alpha) + 9.0 / (128.0 * alpha * alpha));
        assert!((s[0] - asym).abs() < 1e-12 * asym);
        let total = s[0] + 2.0 * s[1..].iter().sum::<f64>();
        assert!((total - 1.0).abs() < 1e-15);
        assert!(s.len() < 1000);
    }
}
