mod common;

use common::{curved_n1_modes, curved_n2, grid, S, TAU};
use kflow_core::connection_space::Sym3Tensor;
use kflow_core::grid_core::{ScalarField, TensorField};
use kflow_core::kahler_geometry::{
    build_geometry, connection_curvature, covariant_derivative, differential_ops, first_bianchi_residual,
    nabla_omega_residual, perturbed_curvature, second_bianchi_residual, torsion_residual, GeometryCache,
    KahlerPotential, PotentialMode,
};
use kflow_core::KflowError;
use std::f64::consts::PI;

/// Eighth-order periodic central differences on a 2-d grid (axis 0 outer).
mod fd {
    const D1: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    const D2: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];

    fn at(v: &[f64], np: usize, i: usize, j: usize, axis: usize, s: i64) -> f64 {
        let n = np as i64;
        let (mut i, mut j) = (i as i64, j as i64);
        if axis == 0 {
            i = (i + s).rem_euclid(n);
        } else {
            j = (j + s).rem_euclid(n);
        }
        v[(i * n + j) as usize]
    }

    pub fn d1(v: &[f64], np: usize, axis: usize) -> Vec<f64> {
        let h = 1.0 / np as f64;
        (0..np * np)
            .map(|p| {
                let (i, j) = (p / np, p % np);
                D1.iter()
                    .enumerate()
                    .map(|(m, c)| c * (at(v, np, i, j, axis, m as i64 + 1) - at(v, np, i, j, axis, -(m as i64) - 1)))
                    .sum::<f64>()
                    / h
            })
            .collect()
    }

    pub fn laplacian(v: &[f64], np: usize) -> Vec<f64> {
        let h = 1.0 / np as f64;
        (0..np * np)
            .map(|p| {
                let (i, j) = (p / np, p % np);
                let mut s = 2.0 * D2[0] * v[p];
                for (m, c) in D2.iter().enumerate().skip(1) {
                    for axis in 0..2 {
                        s += c * (at(v, np, i, j, axis, m as i64) + at(v, np, i, j, axis, -(m as i64)));
                    }
                }
                s / (h * h)
            })
            .collect()
    }

    /// Index on a grid of `2·np` points per axis of coarse point `p`.
    pub fn fine_index(p: usize, np: usize) -> usize {
        (2 * (p / np)) * (2 * np) + 2 * (p % np)
    }
}

#[test]
fn flat_torus_is_exactly_flat() {
    let geom = build_geometry(&KahlerPotential::flat(grid(1, 16))).unwrap();
    assert_eq!(geom.christoffel.sup_norm(), 0.0);
    assert_eq!(geom.riemann.sup_norm(), 0.0);
    assert_eq!(geom.scal.sup_norm(), 0.0);
    assert!(geom.volume.values.iter().all(|&v| v == 1.0));
    assert_eq!(geom.positivity_margin, 1.0);
}

#[test]
fn scalar_curvature_matches_finite_difference_oracle() {
    // n = 1: ω_φ = (1 + Δ_Eφ)ω and g_φ = (1 + Δ_Eφ)g, so Scal = −Δ_E log f / f
    for modes in [vec![PotentialMode::new(vec![1, 0], 0.05 * S, 0.0)], curved_n1_modes()] {
        let np = 64;
        let geom = build_geometry(&KahlerPotential::from_modes(grid(1, np), &modes)).unwrap();
        let fine = grid(1, 2 * np);
        let phi = ScalarField::from_fn(fine, |x| modes.iter().map(|m| m.eval(x)).sum());
        let f: Vec<f64> = fd::laplacian(&phi.values, 2 * np).iter().map(|l| 1.0 + l).collect();
        let logf: Vec<f64> = f.iter().map(|v| v.ln()).collect();
        let lap = fd::laplacian(&logf, 2 * np);
        let mut worst = 0.0_f64;
        for p in 0..geom.spec.total() {
            let q = fd::fine_index(p, np);
            worst = worst.max((geom.scal.values[p] + lap[q] / f[q]).abs());
            assert!((geom.volume.values[p] - f[q]).abs() < 1e-10);
        }
        assert!(worst < 1e-7, "{worst}");
        assert!(geom.scal.sup_norm() > 0.1);
    }
}

#[test]
fn positivity_violation_is_reported() {
    let phi = KahlerPotential::from_modes(grid(1, 16), &[PotentialMode::new(vec![1, 0], 0.05, 0.0)]);
    match build_geometry(&phi) {
        Err(KflowError::PositivityViolation { point, eigenvalue }) => {
            assert!(eigenvalue < 0.0);
            // the smallest eigenvalue sits where cos(2πx¹) = 1
            assert_eq!(point / 16, 0);
            assert!((eigenvalue - (1.0 - 0.05 * 4.0 * PI * PI)).abs() < 1e-9);
        }
        other => panic!("expected a positivity violation, got {other:?}"),
    }
}

#[test]
fn potential_is_normalized_to_mean_zero() {
    let spec = grid(1, 16);
    let phi = KahlerPotential::new(ScalarField::from_fn(spec, |x| 3.0 + 0.001 * (TAU * x[0]).cos()));
    assert!(phi.phi().mean().abs() < 1e-15);
}

#[test]
fn lambda_inverts_omega() {
    let geom = build_geometry(&curved_n2(8)).unwrap();
    let d = 4;
    for k in 0..d {
        for t in 0..d {
            let mut v = vec![0.0; geom.spec.total()];
            for l in 0..d {
                for (p, x) in v.iter_mut().enumerate() {
                    *x += geom.lambda.at(&[k, l])[p] * geom.omega.at(&[l, t])[p];
                }
            }
            let delta = if k == t { 1.0 } else { 0.0 };
            assert!(v.iter().all(|x| (x - delta).abs() < 1e-12));
        }
    }
}

#[test]
fn volume_is_the_pfaffian_ratio_in_dimension_four() {
    let geom = build_geometry(&curved_n2(12)).unwrap();
    let w = |a: usize, b: usize, p: usize| geom.omega.at(&[a, b])[p];
    // axes (x¹, x², y¹, y²); the standard form has Pfaffian −1 in this order
    for p in 0..geom.spec.total() {
        let pf = w(0, 1, p) * w(2, 3, p) - w(0, 2, p) * w(1, 3, p) + w(0, 3, p) * w(1, 2, p);
        assert!((geom.volume.values[p] + pf).abs() < 1e-10);
    }
}

#[test]
fn flat_laplacian_convention() {
    let geom = build_geometry(&KahlerPotential::flat(grid(1, 32))).unwrap();
    let f = ScalarField::from_fn(geom.spec, |x| (TAU * (x[0] + 2.0 * x[1])).cos());
    let lap = differential_ops(&geom).laplacian(&f).unwrap();
    assert!(lap.sub(&f.scale(4.0 * PI * PI * 5.0)).sup_norm() < 1e-9);
}

#[test]
fn flat_hamiltonian_field_of_sine() {
    let geom = build_geometry(&KahlerPotential::flat(grid(1, 32))).unwrap();
    let f = ScalarField::from_fn(geom.spec, |x| (TAU * x[0]).sin());
    let x = differential_ops(&geom).hamiltonian_field(&f).unwrap();
    assert!(x[0].sup_norm() < 1e-12);
    // i(X)ω = dF with ω = dx∧dy gives X^y = −∂_xF
    let expect = ScalarField::from_fn(geom.spec, |x| -TAU * (TAU * x[0]).cos());
    assert!(x[1].sub(&expect).sup_norm() < 1e-12);
}

fn check_field_identities(geom: &GeometryCache, f: &ScalarField) {
    let ops = differential_ops(geom);
    let d = geom.dim();
    let df: Vec<ScalarField> = kflow_core::grid_core::gradient(f);
    let x = ops.hamiltonian_field(f).unwrap();
    let g = ops.gradient_field(f).unwrap();
    for b in 0..d {
        let mut ix = ScalarField::zeros(geom.spec);
        let mut gg = ScalarField::zeros(geom.spec);
        for a in 0..d {
            let w = ScalarField::new(geom.spec, geom.omega.at(&[a, b]).to_vec()).unwrap();
            let m = ScalarField::new(geom.spec, geom.metric.at(&[a, b]).to_vec()).unwrap();
            ix = ix.add(&x[a].mul(&w));
            gg = gg.add(&g[a].mul(&m));
        }
        assert!(ix.sub(&df[b]).sup_norm() < 1e-10);
        assert!(gg.sub(&df[b]).sup_norm() < 1e-10);
    }
    assert!(ops.poisson(f, f).unwrap().sup_norm() < 1e-12);
}

#[test]
fn hamiltonian_and_gradient_fields_on_curved_tori() {
    let geom = build_geometry(&KahlerPotential::from_modes(grid(1, 32), &curved_n1_modes())).unwrap();
    let f = ScalarField::from_fn(geom.spec, |x| (TAU * (x[0] - x[1])).sin() + 0.4 * (TAU * x[1]).cos());
    check_field_identities(&geom, &f);
    let geom = build_geometry(&curved_n2(8)).unwrap();
    let f = ScalarField::from_fn(geom.spec, |x| (TAU * (x[0] + x[3])).sin() + 0.4 * (TAU * x[2]).cos());
    check_field_identities(&geom, &f);
}

#[test]
fn poisson_bracket_is_antisymmetric_and_matches_hamiltonian_pairing() {
    let geom = build_geometry(&KahlerPotential::from_modes(grid(1, 32), &curved_n1_modes())).unwrap();
    let ops = differential_ops(&geom);
    let f = ScalarField::from_fn(geom.spec, |x| (TAU * x[0]).sin());
    let h = ScalarField::from_fn(geom.spec, |x| (TAU * (x[0] + x[1])).cos());
    let fh = ops.poisson(&f, &h).unwrap();
    assert!(fh.add(&ops.poisson(&h, &f).unwrap()).sup_norm() < 1e-12);
    // {F,H} = −ω(X_F, X_H)
    let (xf, xh) = (ops.hamiltonian_field(&f).unwrap(), ops.hamiltonian_field(&h).unwrap());
    let mut w = ScalarField::zeros(geom.spec);
    for a in 0..2 {
        for b in 0..2 {
            let o = ScalarField::new(geom.spec, geom.omega.at(&[a, b]).to_vec()).unwrap();
            w = w.add(&xf[a].mul(&xh[b]).mul(&o));
        }
    }
    assert!(fh.add(&w).sup_norm() < 1e-10);
}

#[test]
fn ddc_of_flat_potential_is_the_laplacian_two_form() {
    let geom = build_geometry(&KahlerPotential::flat(grid(1, 32))).unwrap();
    let f = ScalarField::from_fn(geom.spec, |x| (TAU * (x[0] + 2.0 * x[1])).cos());
    let ddc = differential_ops(&geom).ddc(&f).unwrap();
    let expect = f.scale(-4.0 * PI * PI * 5.0);
    assert!(ddc.component_field(&[0, 1]).sub(&expect).sup_norm() < 1e-9);
    assert!(ddc.component_field(&[1, 0]).add(&expect).sup_norm() < 1e-9);
    assert!(ddc.component_field(&[0, 0]).sup_norm() < 1e-9);
}

#[test]
fn levi_civita_invariants_on_curved_tori() {
    for geom in [
        build_geometry(&KahlerPotential::from_modes(grid(1, 64), &curved_n1_modes())).unwrap(),
        build_geometry(&curved_n2(16)).unwrap(),
    ] {
        assert!(torsion_residual(&geom.christoffel) < 1e-12);
        assert!(nabla_omega_residual(&geom.christoffel, &geom) < 1e-9);
        assert!(first_bianchi_residual(&geom.riemann) < 1e-8);
        let sb = second_bianchi_residual(&geom).unwrap();
        assert!(sb < 1e-7, "{sb}");
        assert!(geom.ricci.symmetry_residual() < 1e-9 || symmetric_residual(&geom.ricci) < 1e-9);
        let ng = covariant_derivative(&geom.metric, &geom, 1).unwrap();
        assert!(ng.sup_norm() < 1e-9, "{}", ng.sup_norm());
    }
}

fn symmetric_residual(t: &TensorField) -> f64 {
    let d = t.spec.dim();
    let mut worst = 0.0_f64;
    for a in 0..d {
        for b in 0..d {
            for (x, y) in t.at(&[a, b]).iter().zip(t.at(&[b, a])) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    worst
}

#[test]
fn covariant_derivative_basics() {
    let spec = grid(1, 16);
    let flat = build_geometry(&KahlerPotential::flat(spec)).unwrap();
    let f = ScalarField::from_fn(spec, |x| (TAU * x[0]).sin() * (TAU * x[1]).cos());
    let t = TensorField::from_components(spec, vec![], vec![f.values.clone()]).unwrap();
    let nf = covariant_derivative(&t, &flat, 1).unwrap();
    let df = kflow_core::grid_core::gradient(&f);
    for a in 0..2 {
        assert!(nf.component_field(&[a]).sub(&df[a]).sup_norm() < 1e-12);
    }
    let n2f = covariant_derivative(&t, &flat, 2).unwrap();
    assert!(symmetric_residual(&n2f) < 1e-12);

    let r6 = TensorField::covariant(spec, 6);
    assert_eq!(covariant_derivative(&r6, &flat, 1).unwrap_err(), KflowError::RankOverflow(7));
    let other = TensorField::covariant(grid(1, 8), 1);
    assert_eq!(covariant_derivative(&other, &flat, 1).unwrap_err(), KflowError::GridMismatch);
}

#[test]
fn connection_curvature_reduces_to_the_cache() {
    let flat = build_geometry(&KahlerPotential::flat(grid(1, 16))).unwrap();
    let pack = connection_curvature(&flat.christoffel, &flat).unwrap();
    assert_eq!(pack.riemann.sup_norm(), 0.0);

    let geom = build_geometry(&KahlerPotential::from_modes(grid(1, 64), &curved_n1_modes())).unwrap();
    let pack = connection_curvature(&geom.christoffel, &geom).unwrap();
    assert!(pack.riemann.sub(&geom.riemann).sup_norm() < 1e-9);
    assert!(pack.ricci.sub(&geom.ricci).sup_norm() < 1e-9);
    assert!(pack.scal.sub(&geom.scal).sup_norm() < 1e-9);
}

#[test]
fn non_symplectic_connection_is_rejected() {
    let geom = build_geometry(&KahlerPotential::flat(grid(1, 8))).unwrap();
    let mut gamma = geom.christoffel.clone();
    gamma.comp_mut(0).iter_mut().for_each(|v| *v = 1.0); // Γ^x_{xx} = 1
    assert!(matches!(connection_curvature(&gamma, &geom), Err(KflowError::SymplecticityViolation { .. })));
}

/// Ricci of `∇ + Â` from eighth-order differences of the coefficients.
fn fd_ricci(gamma: &TensorField, np: usize) -> Vec<Vec<f64>> {
    let d = 2;
    let g = |i: usize, j: usize, k: usize| gamma.at(&[i, j, k]);
    let dg: Vec<Vec<f64>> =
        (0..d).flat_map(|a| (0..d * d * d).map(move |c| (a, c))).map(|(a, c)| fd::d1(gamma.comp(c), np, a)).collect();
    let dgam = |a: usize, i: usize, j: usize, k: usize| &dg[a * d * d * d + (i * d + j) * d + k];
    let total = np * np;
    let mut ric = vec![vec![0.0; total]; d * d];
    // R^e_{abc} = ∂_aΓ^e_{bc} − ∂_bΓ^e_{ac} + Γ^e_{am}Γ^m_{bc} − Γ^e_{bm}Γ^m_{ac};  Ric_{bc} = R^a_{abc}
    for b in 0..d {
        for c in 0..d {
            for p in 0..total {
                let mut s = 0.0;
                for a in 0..d {
                    s += dgam(a, a, b, c)[p] - dgam(b, a, a, c)[p];
                    for m in 0..d {
                        s += g(a, a, m)[p] * g(m, b, c)[p] - g(a, b, m)[p] * g(m, a, c)[p];
                    }
                }
                ric[b * d + c][p] = s;
            }
        }
    }
    ric
}

#[test]
fn perturbed_connection_ricci_matches_finite_difference_oracle() {
    let np = 64;
    let phi = |np| KahlerPotential::from_modes(grid(1, np), &curved_n1_modes());
    let coarse = build_geometry(&phi(np)).unwrap();
    let fine = build_geometry(&phi(2 * np)).unwrap();
    let a_coarse = Sym3Tensor::random_low_mode(coarse.spec, 1, 0.05, &mut common::rng(7));
    let a_fine = Sym3Tensor::random_low_mode(fine.spec, 1, 0.05, &mut common::rng(7));
    let pack = perturbed_curvature(&coarse, &a_coarse.raise(&coarse), 1.0).unwrap();
    let gamma_fine = fine.christoffel.add(&a_fine.raise(&fine));
    let oracle = fd_ricci(&gamma_fine, 2 * np);
    let mut worst = 0.0_f64;
    for c in 0..4 {
        for p in 0..coarse.spec.total() {
            worst = worst.max((pack.ricci.comp(c)[p] - oracle[c][fd::fine_index(p, np)]).abs());
        }
    }
    assert!(worst < 1e-7, "{worst}");
    assert!(pack.ricci.sub(&coarse.ricci).sup_norm() > 1e-3);
    assert!(first_bianchi_residual(&pack.riemann) < 1e-8);
}

#[test]
fn first_bianchi_on_random_symplectic_perturbations() {
    let geom = build_geometry(&curved_n2(8)).unwrap();
    for seed in 0..3 {
        let a = Sym3Tensor::random_low_mode(geom.spec, 1, 0.05, &mut common::rng(seed));
        let pack = perturbed_curvature(&geom, &a.raise(&geom), 1.0).unwrap();
        assert!(first_bianchi_residual(&pack.riemann) < 1e-8);
    }
}
