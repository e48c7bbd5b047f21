mod common;

use common::{curved_n1, curved_n1_modes, curved_n2, flat, grid, mode_field, rng, seeded_pair};
use kflow_core::connection_space::{
    g_je, je_apply, lie_derivative_connection, moment_identity_residual, moment_identity_sides, moment_map,
    moment_map_lc, omega_e, omega_e_trace, random_low_mode_field, relative_sup_diff, wedge_p, Sym3Tensor,
};
use kflow_core::flows::{hamiltonian_flow, pullback_connection, TrigPoly};
use kflow_core::grid_core::{partial_derivative, ScalarField, TensorField};
use kflow_core::kahler_geometry::{
    build_geometry, differential_ops, perturbed_curvature, CurvaturePack, GeometryCache, PotentialMode,
};
use kflow_core::KflowError;

/// Constant symmetric tensor on the 2-torus from `(A₀₀₀, A₀₀₁, A₀₁₁, A₁₁₁)`.
fn constant_sym3(geom: &GeometryCache, a: [f64; 4]) -> Sym3Tensor {
    let mut t = TensorField::covariant(geom.spec, 3);
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let v = a[i + j + k];
                t.comp_mut((i * 2 + j) * 2 + k).iter_mut().for_each(|x| *x = v);
            }
        }
    }
    Sym3Tensor::new(t).unwrap()
}

#[test]
fn omega_e_constant_tensors_match_hand_contraction() {
    // Λ = [[0,−1],[1,0]], so Ω^𝓔 = Σ_i s(i₁)s(i₂)s(i₃) A_i B_{ī} with s(0) = −1, s(1) = 1
    let geom = build_geometry(&flat(1, 8)).unwrap();
    let a = [0.3, -1.2, 0.7, 2.0];
    let b = [1.1, 0.4, -0.9, 0.25];
    let hand = -a[0] * b[3] + 3.0 * a[1] * b[2] - 3.0 * a[2] * b[1] + a[3] * b[0];
    let v = omega_e(&constant_sym3(&geom, a), &constant_sym3(&geom, b), &geom).unwrap();
    assert!((v - hand).abs() < 1e-14, "{v} vs {hand}");
}

#[test]
fn omega_e_is_antisymmetric() {
    for geom in [build_geometry(&flat(1, 16)).unwrap(), build_geometry(&curved_n1(32)).unwrap()] {
        let mut r = rng(3);
        for _ in 0..3 {
            let a = Sym3Tensor::random_low_mode(geom.spec, 2, 1.0, &mut r);
            let b = Sym3Tensor::random_low_mode(geom.spec, 2, 1.0, &mut r);
            let ab = omega_e(&a, &b, &geom).unwrap();
            assert!(omega_e(&a, &a, &geom).unwrap().abs() < 1e-13);
            assert!((ab + omega_e(&b, &a, &geom).unwrap()).abs() < 1e-13 * ab.abs().max(1.0));
        }
    }
}

#[test]
fn trace_form_is_a_fixed_multiple_of_the_triple_lambda_form() {
    let geom = build_geometry(&curved_n1(32)).unwrap();
    let mut r = rng(5);
    for _ in 0..4 {
        let a = Sym3Tensor::random_low_mode(geom.spec, 2, 1.0, &mut r);
        let b = Sym3Tensor::random_low_mode(geom.spec, 2, 1.0, &mut r);
        let ratio = omega_e_trace(&a, &b, &geom).unwrap() / omega_e(&a, &b, &geom).unwrap();
        assert!((ratio - 1.0).abs() < 1e-12, "{ratio}");
    }
}

#[test]
fn je_is_a_compatible_complex_structure() {
    for geom in [build_geometry(&flat(1, 16)).unwrap(), build_geometry(&curved_n1(32)).unwrap()] {
        let mut r = rng(9);
        for _ in 0..5 {
            let a = Sym3Tensor::random_low_mode(geom.spec, 2, 1.0, &mut r);
            let b = Sym3Tensor::random_low_mode(geom.spec, 2, 1.0, &mut r);
            let jja = je_apply(&je_apply(&a, &geom), &geom);
            assert!(jja.add(&a).sup_norm() < 1e-12);
            let aa = g_je(&a, &a, &geom).unwrap();
            assert!(aa > 0.0);
            let (ab, ba) = (g_je(&a, &b, &geom).unwrap(), g_je(&b, &a, &geom).unwrap());
            assert!((ab - ba).abs() < 1e-12 * aa.max(1.0));
        }
    }
}

#[test]
fn omega_e_rejects_grid_mismatch() {
    let geom = build_geometry(&flat(1, 8)).unwrap();
    let a = Sym3Tensor::zeros(grid(1, 16));
    assert_eq!(omega_e(&a, &a, &geom).unwrap_err(), KflowError::GridMismatch);
}

#[test]
fn lie_derivative_of_constant_vanishes() {
    let geom = build_geometry(&curved_n1(32)).unwrap();
    let a = lie_derivative_connection(&ScalarField::constant(geom.spec, 2.0), &geom).unwrap();
    assert!(a.sup_norm() < 1e-12);
}

#[test]
fn flat_lie_derivative_is_the_third_derivative() {
    let geom = build_geometry(&flat(1, 32)).unwrap();
    let (f, _) = seeded_pair(geom.spec, 1, 2);
    let a = lie_derivative_connection(&f, &geom).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let d = partial_derivative(&f, i, 1).unwrap();
                let d = partial_derivative(&d, j, 1).unwrap();
                let d = partial_derivative(&d, k, 1).unwrap();
                let comp = a.t.component_field(&[i, j, k]);
                assert!(comp.sub(&d).sup_norm() < 1e-9 * d.sup_norm().max(1.0));
            }
        }
    }
}

#[test]
fn curved_lie_derivative_matches_flow_difference() {
    let geom = build_geometry(&curved_n1(32)).unwrap();
    let phi = TrigPoly::new(curved_n1_modes());
    let f = TrigPoly::new(vec![PotentialMode::new(vec![1, 0], 0.6, 0.2), PotentialMode::new(vec![1, -1], 0.4, 1.0)]);
    let h = 1e-4;
    let plus = pullback_connection(&geom.christoffel, &hamiltonian_flow(&phi, &f, geom.spec, h, 32).unwrap()).unwrap();
    let minus =
        pullback_connection(&geom.christoffel, &hamiltonian_flow(&phi, &f, geom.spec, -h, 32).unwrap()).unwrap();
    let raised = plus.sub(&minus).scale(0.5 / h);
    let fd = Sym3Tensor::lower_from(&raised, &geom, 1e-6).unwrap();
    let exact = lie_derivative_connection(&f.sample(geom.spec), &geom).unwrap();
    let rel = exact.t.sub(&fd.t).sup_norm() / exact.sup_norm();
    assert!(rel < 1e-5, "{rel}");
}

#[test]
fn flat_moment_map_vanishes() {
    let geom = build_geometry(&flat(1, 16)).unwrap();
    let m = moment_map_lc(&geom).unwrap();
    assert_eq!(m.mu_tilde.sup_norm(), 0.0);
    assert_eq!(m.mu0, 0.0);
    assert_eq!(m.mu.sup_norm(), 0.0);
}

#[test]
fn dimension_two_reduction() {
    let geom = build_geometry(&curved_n1(64)).unwrap();
    let mu = moment_map_lc(&geom).unwrap().mu;
    let target = differential_ops(&geom).laplacian(&geom.scal).unwrap().scale(-0.5);
    assert!(relative_sup_diff(&mu, &target) < 1e-7);
    assert!(mu.sup_norm() > 1.0);
}

#[test]
fn wedge_and_expanded_p_agree_in_dimension_four() {
    let geom = build_geometry(&curved_n2(12)).unwrap();
    let m = moment_map_lc(&geom).unwrap();
    let w = m.p_wedge.clone().unwrap();
    assert!(relative_sup_diff(&w, &m.p_expanded) < 1e-8);
    assert!(m.p_expanded.sup_norm() > 1e-6);
    let again = wedge_p(&CurvaturePack::levi_civita(&geom), &geom).unwrap();
    assert_eq!(again, w);
}

#[test]
fn wedge_form_is_not_applicable_in_dimension_two() {
    let geom = build_geometry(&curved_n1(16)).unwrap();
    assert!(moment_map_lc(&geom).unwrap().p_wedge.is_none());
    assert!(matches!(wedge_p(&CurvaturePack::levi_civita(&geom), &geom), Err(KflowError::NotApplicable(_))));
}

#[test]
fn moment_identity_for_constant_function() {
    let geom = build_geometry(&curved_n1(32)).unwrap();
    let a = Sym3Tensor::random_low_mode(geom.spec, 1, 0.05, &mut rng(4));
    let (lhs, rhs) = moment_identity_sides(&ScalarField::constant(geom.spec, 1.0), &a, &geom, 1e-4).unwrap();
    assert!(lhs.abs() < 1e-9, "{lhs}");
    assert!(rhs.abs() < 1e-12);
}

#[test]
fn moment_identity_on_flat_base_along_a_hamiltonian_direction() {
    let geom = build_geometry(&flat(1, 64)).unwrap();
    let (f, h) = seeded_pair(geom.spec, 12, 1);
    let a = lie_derivative_connection(&h, &geom).unwrap().scale(0.01);
    let (lhs, rhs) = moment_identity_sides(&f, &a, &geom, 1e-4).unwrap();
    // equivariance: Ω^𝓔(L_{X_F}∇, L_{X_H}∇) = ∫{F,H}μ, and μ ≡ 0 on the flat torus
    assert!(lhs.abs() < 1e-6 && rhs.abs() < 1e-6, "{lhs} vs {rhs}");
    let b = Sym3Tensor::random_low_mode(geom.spec, 2, 0.05, &mut rng(13));
    let (lhs, rhs) = moment_identity_sides(&f, &b, &geom, 1e-4).unwrap();
    assert!((lhs - rhs).abs() < 1e-6, "{lhs} vs {rhs}");
    assert!(rhs.abs() > 1e-3);
}

#[test]
fn moment_identity_on_curved_base() {
    let geom = build_geometry(&curved_n1(64)).unwrap();
    for seed in 0..2 {
        let mut r = rng(300 + seed);
        let f = random_low_mode_field(geom.spec, 2, 1.0, 4, &mut r);
        let a = Sym3Tensor::random_low_mode(geom.spec, 2, 0.05, &mut r);
        assert!(moment_identity_residual(&f, &a, &geom, 1e-4).unwrap() < 1e-6);
    }
}

#[test]
fn mu0_does_not_depend_on_the_connection() {
    let geom = build_geometry(&curved_n1(32)).unwrap();
    let base = moment_map_lc(&geom).unwrap().mu0;
    assert!(base.abs() < 1e-10);
    for seed in 0..3 {
        let a = Sym3Tensor::random_low_mode(geom.spec, 1, 0.1, &mut rng(40 + seed));
        let pack = perturbed_curvature(&geom, &a.raise(&geom), 1.0).unwrap();
        let m = moment_map(&pack, &geom).unwrap();
        assert!((m.mu0 - base).abs() < 1e-7);
        assert!(m.mu_tilde.sub(&moment_map_lc(&geom).unwrap().mu_tilde).sup_norm() > 1e-3);
    }
}

#[test]
fn equivariance_of_the_moment_map() {
    // Ω^𝓔(L_{X_H}∇, L_{X_F}∇) = −∫{F,H}μ ω^n/n!
    for geom in [build_geometry(&curved_n1(32)).unwrap(), build_geometry(&curved_n2(16)).unwrap()] {
        let n = geom.spec.n;
        let f = mode_field(geom.spec, &if n == 1 { vec![1, 0] } else { vec![1, 0, 0, 1] }, 0.3);
        let h = mode_field(geom.spec, &if n == 1 { vec![0, 1] } else { vec![0, 1, 1, 0] }, 1.2);
        let lf = lie_derivative_connection(&f, &geom).unwrap();
        let lh = lie_derivative_connection(&h, &geom).unwrap();
        let lhs = omega_e(&lh, &lf, &geom).unwrap();
        let mu = moment_map_lc(&geom).unwrap().mu;
        let fh = differential_ops(&geom).poisson(&f, &h).unwrap();
        let rhs = -geom.integrate(&fh.mul(&mu)).unwrap();
        assert!((lhs - rhs).abs() < 1e-6, "n = {n}: {lhs} vs {rhs}");
        assert!(rhs.abs() > 1e-4);
    }
}
