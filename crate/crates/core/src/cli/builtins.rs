//! Shipped scenarios. Each one exercises a single statement, named in its
//! `anchor`, and runs in seconds.

use serde_json::{json, Value};

use super::scenario::Scenario;
use crate::metric::log_space;

/// Every builtin, in catalogue order.
pub fn builtins() -> Vec<Scenario> {
    [
        laplacian1d(),
        degenerate1d(0.25),
        degenerate1d(0.5),
        degenerate1d(0.75),
        separating(),
        double_zero(),
        radial_shell_2d(),
        surface_2d(),
        resolvent_volume(),
        elliptic_2d(),
    ]
    .into_iter()
    .map(|v| serde_json::from_value(v).expect("builtin scenarios match the schema"))
    .collect()
}

/// Looks a builtin up by name; `d0.5` and `delta0.5` stand in for `δ0.5`.
pub fn builtin(name: &str) -> Option<Scenario> {
    let key = name.replace("delta", "δ").replace("-d0", "-δ0");
    builtins().into_iter().find(|s| s.name == key)
}

fn small_grid() -> Vec<f64> {
    log_space(1e-3, 0.1, 9)
}

fn offdiag_times() -> Vec<f64> {
    vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0]
}

/// Longer list for degenerate profiles: pairs across the zero only count
/// once `t` exceeds the square of the longest edge between them.
fn degenerate_times() -> Vec<f64> {
    vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0]
}

fn euclid_times() -> Vec<f64> {
    vec![0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0]
}

fn power(delta: f64, centers: &[f64], domain: [f64; 2]) -> Value {
    json!({
        "dimension": 1,
        "family": {"kind": "power", "delta": delta, "centers": centers},
        "domain": domain,
        "predicted_gamma": 1.0 - delta,
    })
}

fn interval(lo: f64, hi: f64) -> Value {
    json!({"kind": "box", "min": [lo], "max": [hi]})
}

fn laplacian1d() -> Value {
    json!({
        "name": "laplacian1d",
        "description": "Constant coefficient on [-8, 8]: the Gaussian control for every bound.",
        "anchor": "strongly elliptic control: Gaussian kernel, conservation and unit propagation speed",
        "profile": power(0.0, &[0.0], [-8.0, 8.0]),
        "mesh": {"n": 1024},
        "t_small": small_grid(),
        "t_large": [1.0, 2.0, 5.0],
        "seed": 1,
        "checks": [
            {"kind": "conservation"},
            {"kind": "structure", "t": 0.5},
            {"kind": "classify", "expect": "StronglyElliptic"},
            {"kind": "offdiagonal_gaussian", "times": offdiag_times(), "balls": [
                {"center": [-2.0], "radius": 0.5}, {"center": [2.0], "radius": 0.5},
                {"center": [-0.5], "radius": 0.3}, {"center": [0.5], "radius": 0.3},
                {"center": [4.0], "radius": 0.5}]},
            {"kind": "euclidean_offdiagonal", "times": euclid_times(), "sets": [
                interval(-8.0, -3.0), interval(-2.0, -1.0), interval(1.0, 2.0), interval(3.0, 8.0)]},
            {"kind": "wave_speed", "center": [-6.0], "radius": 1.0, "times": [0.5, 1.0, 2.0, 3.0]},
            {"kind": "smalltime_decay", "gamma": 1.0, "sampling": {"kind": "interior", "margin": 3.0, "stride": 8}},
            {"kind": "largetime_floor", "mode": {"kind": "gaussian"}, "sampling": {"kind": "interior", "margin": 3.0, "stride": 8}},
            {"kind": "ondiagonal_lower", "t": 1.0, "diameter": 0.5, "centers": [[-4.0], [-2.0], [0.0], [2.0], [4.0]]},
            {"kind": "holder_fit", "origin": 0.0, "range": [1e-3, 1e-1], "expect": 1.0}
        ]
    })
}

fn degenerate1d(delta: f64) -> Value {
    let separating = delta >= 0.5;
    let (k_max, verdict) = match (separating, delta == 0.5) {
        (true, true) => (12, "Separating"),
        (true, false) => (11, "Separating"),
        _ => (11, "ClosableDegenerate"),
    };
    let levels: Vec<usize> = (6..=k_max).map(|k| 8usize << k).collect();
    let mut checks = vec![
        json!({"kind": "conservation"}),
        json!({"kind": "structure", "t": 0.5}),
        json!({"kind": "classify", "expect": verdict}),
        json!({"kind": "offdiagonal_gaussian", "times": degenerate_times(), "balls": [
            {"center": [-5.0], "radius": 0.5},
            {"center": [-2.0], "radius": 0.5}, {"center": [-0.5], "radius": 0.3},
            {"center": [0.0], "radius": 0.2}, {"center": [0.5], "radius": 0.3},
            {"center": [2.0], "radius": 0.5}]}),
        json!({"kind": "euclidean_offdiagonal", "times": euclid_times(), "sets": [
            interval(-8.0, -3.0), interval(-2.0, -1.0), interval(1.0, 2.0), interval(3.0, 8.0)]}),
        json!({"kind": "separation", "probe": {"cut": 0.0, "box": [-4.0, 4.0], "t": 1.0, "levels": levels}}),
        json!({"kind": "holder_fit", "origin": 0.0, "range": [1e-3, 1e-1], "expect": 1.0 - delta}),
    ];
    if delta == 0.5 {
        checks.push(json!({"kind": "wave_speed", "center": [-6.0], "radius": 1.0, "times": [0.5, 1.0, 2.0, 3.0]}));
    }
    json!({
        "name": format!("degenerate1d-δ{delta}"),
        "description": format!("c = (x²/(1+x²))^{delta} on [-8, 8]; the zero at 0 sits on a node (n even)."),
        "anchor": if separating {
            "1/c is not integrable at the zero, so the line splits into invariant half-lines"
        } else {
            "1/c is integrable at the zero, so the semigroup stays irreducible"
        },
        "profile": power(delta, &[0.0], [-8.0, 8.0]),
        "mesh": {"n": 1024},
        "t_small": small_grid(),
        "t_large": [1.0, 2.0, 5.0],
        "seed": 2,
        "checks": checks,
    })
}

fn separating() -> Value {
    json!({
        "name": "separating-δ0.75",
        "description": "δ = 0.75 with an odd cell count, so a face midpoint sits on the zero and its conductance vanishes exactly.",
        "anchor": "separation: S_t leaves L2 of each half-line invariant when 1/c diverges at the zero",
        "profile": power(0.75, &[0.0], [-4.0, 4.0]),
        "mesh": {"n": 1023},
        "t_small": small_grid(),
        "t_large": [1.0, 2.0, 5.0],
        "seed": 3,
        "checks": [
            {"kind": "conservation"},
            {"kind": "structure", "t": 0.5},
            {"kind": "classify", "expect": "Separating"},
            {"kind": "separation", "probe": {"cut": 0.0, "box": [-4.0, 4.0], "t": 1.0,
                "levels": [512, 1024, 2048, 4096, 8192, 16384]}},
            {"kind": "invariance", "omega": interval(-4.0, 0.0), "t": 1.0, "tol": 1e-10},
            {"kind": "form_additivity", "omega": interval(-4.0, 0.0)},
            {"kind": "offdiagonal_gaussian", "times": offdiag_times(), "balls": [
                {"center": [-1.0], "radius": 0.5}, {"center": [1.0], "radius": 0.5},
                {"center": [-0.3], "radius": 0.2}, {"center": [0.3], "radius": 0.2},
                {"center": [2.5], "radius": 0.5}]},
            {"kind": "euclidean_offdiagonal", "times": euclid_times(), "sets": [
                interval(-4.0, -2.0), interval(-1.0, -0.1), interval(0.1, 1.0), interval(2.0, 4.0)]},
            {"kind": "wave_speed", "center": [-3.0], "radius": 0.5, "times": [0.25, 0.5, 1.0],
                "beyond_cut": interval(0.0, 4.0), "cut_times": [1.0, 2.0, 4.0, 8.0]},
            {"kind": "ondiagonal_lower", "t": 1.0, "diameter": 0.5, "separated": true,
                "centers": [[-3.0], [-1.0], [0.0], [1.0], [3.0]]}
        ]
    })
}

fn double_zero() -> Value {
    json!({
        "name": "double-zero",
        "description": "Zeros at ±1 with δ = 0.75; n = 1020 puts face midpoints on both zeros, isolating [-1, 1].",
        "anchor": "large-time floor: sup K_t >= 1/(x2 - x1) for every t, so no t^(-d/2) decay",
        "profile": power(0.75, &[-1.0, 1.0], [-4.0, 4.0]),
        "mesh": {"n": 1020},
        "t_small": small_grid(),
        "t_large": [1.0, 2.0, 5.0, 10.0, 20.0, 50.0],
        "seed": 4,
        "checks": [
            {"kind": "conservation"},
            {"kind": "structure", "t": 1.0},
            {"kind": "largetime_floor", "mode": {"kind": "separated", "component_volume": 2.0, "growth": 3.0}},
            {"kind": "largetime_floor", "mode": {"kind": "separated", "component_volume": 2.0, "growth": 3.0},
                "sampling": {"kind": "points", "points": [[0.0]]}},
            {"kind": "invariance", "omega": interval(-1.0, 1.0), "t": 5.0, "tol": 1e-10},
            {"kind": "form_additivity", "omega": interval(-1.0, 1.0)}
        ]
    })
}

fn radial_shell_2d() -> Value {
    json!({
        "name": "radial-shell-2d",
        "description": "c = (ρ²/(1+ρ²))^0.75 with ρ the distance to the unit circle; faces crossing the circle are cut.",
        "anchor": "radial separation: S_t leaves L2 of the unit disc invariant",
        "profile": {"dimension": 2, "family": {"kind": "radial_shell", "delta": 0.75, "radius": 1.0},
            "domain": [-2.0, 2.0]},
        "mesh": {"n": 64, "snap_cut": true},
        "t_small": log_space(4e-3, 0.1, 5),
        "t_large": [0.5, 1.0],
        "seed": 5,
        "checks": [
            {"kind": "conservation"},
            {"kind": "structure", "t": 0.2},
            {"kind": "invariance", "omega": {"kind": "inner"}, "t": 0.5},
            {"kind": "form_additivity", "omega": {"kind": "inner"}},
            {"kind": "offdiagonal_gaussian", "times": [0.02, 0.05, 0.1, 0.2, 0.5], "balls": [
                {"center": [0.0, 0.0], "radius": 0.3}, {"center": [0.5, 0.0], "radius": 0.2},
                {"center": [-1.5, -1.5], "radius": 0.3}, {"center": [1.5, 0.0], "radius": 0.3},
                {"center": [0.0, 1.5], "radius": 0.3}]},
            {"kind": "euclidean_offdiagonal", "times": euclid_times(), "sets": [
                {"kind": "ball", "center": [0.0, 0.0], "radius": 0.4},
                {"kind": "ball", "center": [1.5, 1.5], "radius": 0.4},
                {"kind": "box", "min": [-2.0, -2.0], "max": [-1.2, -1.2]},
                {"kind": "box", "min": [1.2, -2.0], "max": [2.0, -1.2]}]}
        ]
    })
}

fn surface_2d() -> Value {
    let phi: Vec<f64> = (0..=32).map(|k| 0.25 * (std::f64::consts::PI * (-1.0 + k as f64 / 16.0)).sin()).collect();
    json!({
        "name": "surface-2d",
        "description": "c = (z²/(1+z²))^0.75 with z = x2 - Φ(x1) for a sinusoidal Φ; faces are not snapped.",
        "anchor": "separation across a surface: the region below z = Φ(y) becomes invariant as the mesh refines",
        "profile": {"dimension": 2, "family": {"kind": "surface", "delta": 0.75, "phi": phi, "phi_range": [-1.0, 1.0]},
            "domain": [-1.0, 1.0]},
        "mesh": {"n": 64},
        "t_small": log_space(2e-3, 0.05, 5),
        "t_large": [0.2, 0.5],
        "seed": 6,
        "checks": [
            {"kind": "conservation"},
            {"kind": "structure", "t": 0.1},
            {"kind": "invariance_refinement", "omega": {"kind": "inner"}, "t": 0.1, "levels": [16, 32, 64, 128]},
            {"kind": "offdiagonal_gaussian", "times": [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0], "balls": [
                {"center": [-0.5, -0.6], "radius": 0.2}, {"center": [0.5, -0.4], "radius": 0.2},
                {"center": [0.0, -0.8], "radius": 0.15},
                {"center": [0.0, 0.6], "radius": 0.2}, {"center": [-0.6, 0.5], "radius": 0.2},
                {"center": [0.6, 0.7], "radius": 0.2}]}
        ]
    })
}

fn resolvent_volume() -> Value {
    json!({
        "name": "resolvent-volume",
        "description": "δ = 0.5 on [-4, 4], n = 2048; resolvent diagonal against d_C ball volumes at and away from the zero. The smallest radius is the d_C length of four cells at each origin.",
        "anchor": "resolvent kernel K_(I + r^2 H)^(-2m)(x; x) is comparable to 1/|B_C(x; r)|",
        "profile": power(0.5, &[0.0], [-4.0, 4.0]),
        "mesh": {"n": 2048},
        "t_small": small_grid(),
        "t_large": [1.0],
        "seed": 7,
        "checks": [
            {"kind": "conservation"},
            {"kind": "resolvent_volume", "origin": [0.0], "radii": {"min": 0.25, "max": 1.6, "count": 10}},
            {"kind": "resolvent_volume", "origin": [2.0], "radii": {"min": 0.0661, "max": 1.6, "count": 10}}
        ]
    })
}

fn elliptic_2d() -> Value {
    json!({
        "name": "elliptic-2d",
        "description": "Anisotropic constant matrix diag(2, 0.5) on [-2, 2]²: the Euclidean bound with ‖C‖ = 2.",
        "anchor": "Euclidean off-diagonal bound with 4 ||C|| t in the exponent",
        "profile": {"dimension": 2, "family": {"kind": "strongly_elliptic", "matrix": [[2.0, 0.0], [0.0, 0.5]]},
            "domain": [-2.0, 2.0]},
        "mesh": {"n": 48},
        "t_small": log_space(5e-3, 0.1, 5),
        "t_large": [0.5, 1.0],
        "seed": 8,
        "checks": [
            {"kind": "conservation"},
            {"kind": "structure", "t": 0.2},
            {"kind": "classify", "expect": "StronglyElliptic"},
            {"kind": "euclidean_offdiagonal", "times": [0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0], "sets": [
                {"kind": "ball", "center": [0.0, 0.0], "radius": 0.3},
                {"kind": "box", "min": [1.0, -2.0], "max": [2.0, 2.0]},
                {"kind": "box", "min": [-2.0, 1.0], "max": [0.5, 2.0]},
                {"kind": "box", "min": [-2.0, -2.0], "max": [-1.0, -1.0]}]}
        ]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalogue_round_trips_and_validates() {
        let all = builtins();
        assert!(all.len() >= 8);
        for s in &all {
            s.validate().unwrap_or_else(|e| panic!("{}: {e}", s.name));
            assert!(!s.anchor.is_empty(), "{} has no anchor", s.name);
            assert_eq!(&Scenario::parse(&s.to_json().unwrap(), &[]).unwrap(), s);
        }
        for name in ["laplacian1d", "degenerate1d-δ0.25", "degenerate1d-δ0.5", "degenerate1d-δ0.75", "double-zero",
            "radial-shell-2d", "surface-2d", "resolvent-volume", "separating-δ0.75"]
        {
            assert!(builtin(name).is_some(), "{name}");
        }
        assert_eq!(builtin("degenerate1d-d0.5").unwrap().name, "degenerate1d-δ0.5");
    }
}
