mod support;

use conic_core::stepper::{prox_k, prox_l2, prox_linf, rho_k};
use conic_core::OracleWorkspace;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;
use support::*;

fn cone_count() -> usize {
    catalogue(21).len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    // ρ_k ≤ π_k for any z̄ once μ > 0
    #[test]
    fn rho_is_a_lower_bound_on_prox(idx in 0..cone_count(), seed in any::<u64>()) {
        let (name, cone) = catalogue(21).swap_remove(idx);
        let mut r = rng(seed);
        let s = interior_point(&cone, &mut r);
        let mu = (r.random_range(-6.0..2.0f64)).exp();
        // half of the samples near the central path, half arbitrary
        let z: Vec<f64> = if r.random_bool(0.5) {
            grad(&cone, &s).iter().zip(normal_vec(&mut r, s.len())).map(|(g, e)| mu * (-g + 0.3 * e)).collect()
        } else {
            normal_vec(&mut r, s.len())
        };
        let mut ws = OracleWorkspace::new(cone.clone());
        let pi = prox_k(&mut ws, &s, &z, mu);
        let rho = rho_k(&s, &z, mu, cone.nu());
        prop_assert!(rho >= 0.0);
        prop_assert!(rho <= pi + 1e-12 * (1.0 + pi), "{name}: ρ = {rho} > π = {pi}");
    }

    // π_k < 1 implies s̄ interior and z̄ in the dual interior
    #[test]
    fn small_prox_implies_interior(idx in 0..cone_count(), seed in any::<u64>(), radius in 0.0..0.999f64) {
        let (name, cone) = catalogue(21).swap_remove(idx);
        let mut r = rng(seed);
        let s = interior_point(&cone, &mut r);
        let mu = (r.random_range(-4.0..1.0f64)).exp();
        let mut ws = OracleWorkspace::new(cone.clone());
        // z/μ + g = H^{1/2}ξ with ‖ξ‖ = radius gives π = radius
        let h = ws.hessian(&s).unwrap();
        let l = h.cholesky().expect("Hessian is positive definite").l();
        let mut xi = DVector::from_vec(normal_vec(&mut r, s.len()));
        xi *= radius / xi.norm();
        let lx = &l * xi;
        let g = grad(&cone, &s);
        let z: Vec<f64> = g.iter().zip(lx.iter()).map(|(gi, v)| mu * (v - gi)).collect();
        let pi = prox_k(&mut ws, &s, &z, mu);
        prop_assert!((pi - radius).abs() <= 1e-6, "{name}: π = {pi}, expected {radius}");
        if pi < 1.0 {
            prop_assert!(ws.is_feasible(&s));
            if let Some(ok) = ws.dual_feasible(&z) {
                prop_assert!(ok, "{name}: z̄ not dual feasible at π = {pi}");
            }
        }
    }

    #[test]
    fn linf_aggregate_never_exceeds_l2(pis in prop::collection::vec(0.0..10.0f64, 1..12)) {
        prop_assert!(prox_linf(&pis) <= prox_l2(&pis));
    }
}

#[test]
fn one_dimensional_equality_case() {
    let cone = conic_core::ConeDescriptor::nonneg(1).unwrap();
    let mut ws = OracleWorkspace::new(cone.clone());
    let pi = prox_k(&mut ws, &[1.0], &[2.0], 1.0);
    let rho = rho_k(&[1.0], &[2.0], 1.0, 1.0);
    assert!((pi - 1.0).abs() <= 1e-12);
    assert!((rho - 1.0).abs() <= 1e-12);
}

#[test]
fn prox_is_zero_on_the_central_path() {
    for (name, cone) in catalogue(4) {
        let mut r = rng(8);
        let s = interior_point(&cone, &mut r);
        let mu = 0.37;
        let z: Vec<f64> = grad(&cone, &s).iter().map(|g| -mu * g).collect();
        let mut ws = OracleWorkspace::new(cone.clone());
        let pi = prox_k(&mut ws, &s, &z, mu);
        assert!(pi <= 1e-7, "{name}: π = {pi}");
    }
}

#[test]
fn prox_is_infinite_outside_the_cone() {
    let cone = conic_core::ConeDescriptor::nonneg(2).unwrap();
    let mut ws = OracleWorkspace::new(cone);
    assert!(prox_k(&mut ws, &[1.0, -1.0], &[1.0, 1.0], 1.0).is_infinite());
    assert!(prox_k(&mut ws, &[1.0, 1.0], &[1.0, 1.0], 0.0).is_infinite());
}
