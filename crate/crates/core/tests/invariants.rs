//! Randomized invariants that must hold for every admissible input.

use degenlab::cli::{apply_override, builtin, Scenario};
use degenlab::coeffs::CoefficientProfile;
use degenlab::evolve::{heat_evolve, HeatBackend};
use degenlab::grid::{assemble, Mesh};
use degenlab::metric::distance_1d;
use proptest::prelude::*;

fn operator(delta: f64, center: f64, n: usize, eps: f64) -> degenlab::grid::DiscreteOperator {
    let p = CoefficientProfile::power_1d(delta, &[center], [-2.0, 2.0]).unwrap();
    let mesh = Mesh::interval(-2.0, 2.0, n).unwrap();
    assemble(&p, &mesh, eps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn assembled_operator_is_a_symmetric_m_matrix(
        delta in 0.0..0.95f64, center in -1.5..1.5f64, n in 8usize..300, eps in prop::sample::select(vec![0.0, 1e-6, 0.1]),
    ) {
        let a = operator(delta, center, n, eps);
        let scale = a.norm_inf();
        for (i, j, v) in a.entries() {
            prop_assert_eq!(v, a.get(j, i));
            if i != j {
                prop_assert!(v <= 0.0);
            }
        }
        for s in a.row_sums() {
            prop_assert!(s.abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn heat_flow_is_positive_conservative_and_contracting(
        delta in 0.0..0.9f64, n in 16usize..200, t in 1e-3..2.0f64, seed in 0u64..1000,
    ) {
        let a = operator(delta, 0.0, n, 0.0);
        let phi: Vec<f64> = (0..a.size()).map(|i| ((i as u64 * 2654435761 + seed) % 97) as f64 / 97.0).collect();
        let out = heat_evolve(&a, &phi, t, HeatBackend::ChebyshevExp).unwrap().values;
        let mass0: f64 = phi.iter().sum();
        let mass1: f64 = out.iter().sum();
        prop_assert!((mass1 - mass0).abs() <= 1e-9 * mass0.max(1.0));
        let max0 = phi.iter().cloned().fold(0.0, f64::max);
        for v in &out {
            prop_assert!(*v >= -1e-10 && *v <= max0 + 1e-10);
        }
    }

    #[test]
    fn line_distance_is_additive_and_grows_as_viscosity_vanishes(
        delta in 0.05..0.95f64, mut xs in prop::array::uniform3(-1.9..1.9f64), eps in 1e-8..1.0f64,
    ) {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let p = CoefficientProfile::power_1d(delta, &[0.0], [-2.0, 2.0]).unwrap();
        let d = |a: f64, b: f64, e: f64| distance_1d(&p, a, b, e).unwrap();
        let whole = d(xs[0], xs[2], 0.0);
        prop_assert!((whole - d(xs[0], xs[1], 0.0) - d(xs[1], xs[2], 0.0)).abs() <= 1e-8 * whole.max(1.0));
        prop_assert!(d(xs[0], xs[2], eps) <= whole * (1.0 + 1e-10));
        prop_assert!(d(xs[0], xs[2], eps) >= d(xs[0], xs[2], 2.0 * eps) * (1.0 - 1e-10));
        prop_assert!(whole >= xs[2] - xs[0] - 1e-12);
    }

    #[test]
    fn scalar_override_survives_a_round_trip(seed in 0u64..u64::MAX, n in 8usize..4096) {
        let s = builtin("laplacian1d").unwrap();
        let text = s.to_json().unwrap();
        let parsed = Scenario::parse(&text, &[format!("seed={seed}"), format!("mesh.n={n}")]).unwrap();
        prop_assert_eq!(parsed.seed, seed);
        prop_assert_eq!(parsed.mesh.n, n);
        let mut v: serde_json::Value = serde_json::from_str(&parsed.to_json().unwrap()).unwrap();
        apply_override(&mut v, "description=plain text").unwrap();
        prop_assert_eq!(v["description"].as_str(), Some("plain text"));
    }
}
