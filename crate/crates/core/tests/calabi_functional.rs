mod common;

use common::{curved_n1, flat, grid, mode_field, seeded_pair, S};
use kflow_core::acs_space::{i_apply, lc_star, lie_derivative_j, CompatibleACS};
use kflow_core::calabi_functional::{
    assemble_d, calabi, d_apply, d_apply_linearized, d_laplacian_fd, d_scal_fd, d_star_apply, decode_matrix,
    df_pairing, encode_matrix, functional_f, grad_f, mu_of, mu_via_cache, optimize, read_matrix, variation_formulas,
    write_matrix, MuPipeline, OptimizerConfig, Preconditioner, StopReason, H_REL,
};
use kflow_core::connection_space::{omega_e, relative_sup_diff};
use kflow_core::grid_core::ScalarField;
use kflow_core::kahler_geometry::{build_geometry, differential_ops, GeometryCache, KahlerPotential, PotentialMode};
use kflow_core::numerics::richardson_derivative;
use nalgebra::DMatrix;
use std::f64::consts::PI;

fn single_mode(np: usize) -> KahlerPotential {
    KahlerPotential::from_modes(grid(1, np), &[PotentialMode::new(vec![1, 0], 0.05 * S, 0.0)])
}

fn l2(f: &ScalarField, geom: &GeometryCache) -> f64 {
    geom.inner(f, f).unwrap().sqrt()
}

/// Step for differencing in the direction `psi`, scaled by its flat Laplacian.
fn step(psi: &ScalarField) -> f64 {
    let flat = build_geometry(&KahlerPotential::flat(psi.spec)).unwrap();
    H_REL / differential_ops(&flat).laplacian(psi).unwrap().sup_norm()
}

#[test]
fn functionals_vanish_on_the_flat_torus() {
    let phi = flat(1, 16);
    assert!(functional_f(&phi).unwrap().abs() < 1e-20);
    assert!(calabi(&phi).unwrap().abs() < 1e-20);
    assert!(grad_f(&phi).unwrap().sup_norm() < 1e-12);
}

#[test]
fn functional_is_positive_off_the_flat_metric() {
    let phi = single_mode(32);
    assert!(functional_f(&phi).unwrap() > 1e-6);
    assert!(calabi(&phi).unwrap() > 0.0);
    assert!(calabi(&curved_n1(32)).unwrap() > 0.0);
}

#[test]
fn functional_is_invariant_under_grid_translation() {
    let phi = curved_n1(32);
    let moved = KahlerPotential::new(phi.phi().translate(&[5, -3]));
    let (a, b) = (functional_f(&phi).unwrap(), functional_f(&moved).unwrap());
    assert!((a - b).abs() < 1e-12 * a, "{a} {b}");
}

#[test]
fn mu_routes_agree() {
    let phi = curved_n1(32);
    let mu = mu_of(&phi).unwrap();
    assert!(relative_sup_diff(&mu, &mu_via_cache(&phi).unwrap()) < 1e-10);
    let pipe = MuPipeline::new(&phi).unwrap();
    let piped = ScalarField::new(phi.spec(), pipe.mu()).unwrap();
    assert!(relative_sup_diff(&mu, &piped) < 1e-10);
}

#[test]
fn flat_d_is_half_the_cubed_laplacian() {
    let spec = grid(1, 32);
    let phi = KahlerPotential::flat(spec);
    for k in [[0i64, 1], [2, 1]] {
        let psi = mode_field(spec, &k, 0.3);
        let lambda = 4.0 * PI * PI * (k[0] * k[0] + k[1] * k[1]) as f64;
        let expect = psi.scale(0.5 * lambda.powi(3));
        assert!(relative_sup_diff(&d_apply(&phi, &psi).unwrap(), &expect) < 1e-8);
        assert!(relative_sup_diff(&d_apply_linearized(&phi, &psi).unwrap(), &expect) < 1e-8);
    }
}

#[test]
fn d_annihilates_constants() {
    for phi in [flat(1, 16), curved_n1(32)] {
        let one = ScalarField::constant(phi.spec(), 1.0);
        assert!(d_apply(&phi, &one).unwrap().sup_norm() < 1e-9);
        assert!(d_apply_linearized(&phi, &one).unwrap().sup_norm() < 1e-9);
    }
}

#[test]
fn nonlinear_and_linearized_d_agree() {
    let phi = curved_n1(32);
    let (psi, _) = seeded_pair(phi.spec(), 11, 2);
    let a = d_apply(&phi, &psi).unwrap();
    let b = d_apply_linearized(&phi, &psi).unwrap();
    assert!(relative_sup_diff(&a, &b) < 1e-6);
}

#[test]
fn adjoint_identity_on_random_pairs() {
    let phi = curved_n1(32);
    let geom = build_geometry(&phi).unwrap();
    for seed in [12, 13] {
        let (p1, p2) = seeded_pair(geom.spec, seed, 2);
        let dp1 = d_apply(&phi, &p1).unwrap();
        let lhs = geom.inner(&dp1, &p2).unwrap();
        let rhs = geom.inner(&p1, &d_star_apply(&phi, &p2).unwrap()).unwrap();
        assert!((lhs - rhs).abs() < 1e-7 * l2(&dp1, &geom) * l2(&p2, &geom));
    }
}

#[test]
fn assembled_and_matrix_free_adjoints_agree() {
    let phi = curved_n1(8);
    let d = assemble_d(&phi).unwrap();
    let (_, chi) = seeded_pair(phi.spec(), 14, 1);
    let a = d.adjoint_apply(&chi);
    let b = d_star_apply(&phi, &chi).unwrap();
    assert!(relative_sup_diff(&b, &a) < 1e-6);
}

#[test]
fn differential_of_functional_matches_finite_differences() {
    let phi = curved_n1(32);
    let (psi, _) = seeded_pair(phi.spec(), 15, 2);
    let pairing = df_pairing(&phi, &psi).unwrap();
    let fd = richardson_derivative(|t| functional_f(&phi.perturbed(t, &psi)).unwrap(), step(&psi));
    assert!((pairing - fd).abs() < 1e-5 * fd.abs(), "{pairing} vs {fd}");
}

#[test]
fn flat_hessian_is_nonnegative() {
    let spec = grid(1, 16);
    let phi = KahlerPotential::flat(spec);
    let geom = build_geometry(&phi).unwrap();
    let (psi, _) = seeded_pair(spec, 16, 2);
    let dpsi = d_apply(&phi, &psi).unwrap();
    let hess = d_star_apply(&phi, &dpsi).unwrap().scale(2.0);
    let quad = geom.inner(&hess, &psi).unwrap();
    let norm2 = geom.inner(&dpsi, &dpsi).unwrap();
    assert!(norm2 > 0.0);
    assert!((quad - 2.0 * norm2).abs() < 1e-9 * norm2);
}

#[test]
fn flat_kernel_is_the_constants() {
    let d = assemble_d(&KahlerPotential::flat(grid(1, 8))).unwrap();
    assert_eq!(d.report.kernel_dimension, 1);
    assert!(d.report.min_eigenvalue > -1e-9);
    assert!(d.report.symmetry_residual < 1e-9);
    let lead = 0.5 * (4.0 * PI * PI).powi(3);
    assert!((d.report.smallest_nonzero_singular_value - lead).abs() < 1e-6 * lead);
    let dd = d.dstar_d();
    assert!((&dd - dd.transpose()).amax() < 1e-9 * dd.amax());
}

#[test]
fn assembly_size_guard() {
    assert!(assemble_d(&KahlerPotential::flat(grid(1, 128))).is_err());
}

#[test]
fn matrix_roundtrip_and_malformed_input() {
    let m = DMatrix::from_fn(3, 2, |i, j| i as f64 - 0.5 * j as f64);
    let bytes = encode_matrix(&m);
    assert_eq!(decode_matrix(&bytes).unwrap(), m);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    write_matrix(&path, &m).unwrap();
    assert_eq!(read_matrix(&path).unwrap(), m);
    assert!(decode_matrix(&bytes[..bytes.len() - 1]).is_err());
    assert!(decode_matrix(&bytes[..4]).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(decode_matrix(&extra).is_err());
    // no entries, but a dimension far beyond the size limit
    let mut degenerate = 0u64.to_le_bytes().to_vec();
    degenerate.extend_from_slice(&(1u64 << 62).to_le_bytes());
    assert!(decode_matrix(&degenerate).is_err());
}

#[test]
fn flat_scalar_variation_is_minus_bilaplacian() {
    let spec = grid(1, 16);
    let phi = KahlerPotential::flat(spec);
    let psi = mode_field(spec, &[1, 1], 0.2);
    let lambda = 8.0 * PI * PI;
    let v = variation_formulas(&phi, &psi).unwrap();
    assert!(relative_sup_diff(&v.d_scal, &psi.scale(-lambda * lambda)) < 1e-12);
}

#[test]
fn variation_formulas_match_finite_differences() {
    let phi = curved_n1(32);
    let (psi, f) = seeded_pair(phi.spec(), 17, 2);
    let h = step(&psi);
    let v = variation_formulas(&phi, &psi).unwrap();
    let fd = d_scal_fd(&phi, &psi, h).unwrap();
    assert!(v.d_scal.sub(&fd).sup_norm() < 1e-6 * fd.sup_norm().max(1.0));
    let dl = v.d_laplacian(&f).unwrap();
    let dl_fd = d_laplacian_fd(&phi, &psi, &f, h).unwrap();
    assert!(dl.sub(&dl_fd).sup_norm() < 1e-6 * dl_fd.sup_norm().max(1.0));
    let one = ScalarField::constant(phi.spec(), 1.0);
    assert!(v.d_laplacian(&one).unwrap().sup_norm() < 1e-9);
}

/// `−2Ω^𝓔(lc*(L_{X_μ}J), lc*(J L_{X_ψ}J))` at the base metric.
fn first_variation_form(phi: &KahlerPotential, psi: &ScalarField) -> f64 {
    let geom = build_geometry(phi).unwrap();
    let j = CompatibleACS::standard(&geom);
    let mu = mu_of(phi).unwrap();
    let a = lc_star(&lie_derivative_j(&mu, &j, &geom).unwrap(), &j, &geom).unwrap();
    let b = lc_star(&i_apply(&lie_derivative_j(psi, &j, &geom).unwrap(), &j), &j, &geom).unwrap();
    -2.0 * omega_e(&a, &b, &geom).unwrap()
}

#[test]
fn first_variation_as_a_symplectic_pairing() {
    let spec = grid(1, 32);
    let (psi, _) = seeded_pair(spec, 18, 2);
    let flat = KahlerPotential::flat(spec);
    assert!(first_variation_form(&flat, &psi).abs() < 1e-12);
    assert!(df_pairing(&flat, &psi).unwrap().abs() < 1e-12);
    let phi = curved_n1(32);
    let lhs = df_pairing(&phi, &psi).unwrap();
    let rhs = first_variation_form(&phi, &psi);
    assert!((lhs - rhs).abs() < 1e-5 * lhs.abs(), "{lhs} vs {rhs}");
}

fn optimizer_config() -> OptimizerConfig {
    OptimizerConfig {
        preconditioner: Preconditioner::FlatInverseHessian,
        f_tol_rel: 0.0,
        f_tol_abs: 0.0,
        max_iters: 60,
        ..OptimizerConfig::default()
    }
}

#[test]
fn optimizer_stops_immediately_at_the_flat_metric() {
    let rep = optimize(&flat(1, 16), &OptimizerConfig::default()).unwrap();
    assert_eq!(rep.iterations, 0);
    assert_eq!(rep.f_final, 0.0);
    assert_ne!(rep.stop, StopReason::LineSearchFailure);
}

#[test]
fn optimizer_rejects_bad_config() {
    let cfg = OptimizerConfig { backtrack: 1.5, ..OptimizerConfig::default() };
    assert!(cfg.validate().is_err());
    assert!(optimize(&flat(1, 8), &cfg).is_err());
}

fn check_convergence(phi0: &KahlerPotential) {
    let rep = optimize(phi0, &optimizer_config()).unwrap();
    assert!(rep.is_monotone());
    assert!(rep.f_final < 1e-10 * rep.f_initial, "{} {}", rep.f_final, rep.f_initial);
    assert!(rep.mu_inf_final < 1e-6);
    assert!(rep.phi_inf_final < 1e-5);
    assert!(rep.to_csv().starts_with("iter,F,mu_inf,step\n"));
    assert_eq!(rep.to_csv().lines().count(), rep.history.len() + 1);

    // Killing certificate at the endpoint
    let phi = rep.phi.unwrap();
    let geom = build_geometry(&phi).unwrap();
    let j = CompatibleACS::standard(&geom);
    let mu = mu_of(&phi).unwrap();
    assert!(lie_derivative_j(&mu, &j, &geom).unwrap().sup_norm() < 1e-3);
}

#[test]
fn optimizer_converges_from_a_single_mode() {
    check_convergence(&single_mode(32));
}

#[test]
fn optimizer_converges_from_two_modes() {
    check_convergence(&curved_n1(32));
}

#[test]
fn gradient_has_zero_weighted_mean() {
    let phi = curved_n1(16);
    let g = grad_f(&phi).unwrap();
    assert_eq!(g.spec, phi.spec());
    let geom = build_geometry(&phi).unwrap();
    assert!(geom.integrate(&g).unwrap().abs() < 1e-10 * g.sup_norm());
}
