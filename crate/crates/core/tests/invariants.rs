//! Property tests for the cross-cutting invariants of each module.
mod common;

use common::{curved_n1_modes, grid, rng, seeded_pair, S};
use kflow_core::acs_space::{condition_c_pairing, lc, CompatibleACS};
use kflow_core::calabi_functional::{decode_matrix, encode_matrix, functional_f};
use kflow_core::connection_space::{
    lie_derivative_connection, moment_map, moment_map_lc, omega_e, random_low_mode_field, Sym3Tensor,
};
use kflow_core::flows::{moser_flow, moser_residual, pullback_connection, DiscreteDiffeo, PotentialPath};
use kflow_core::grid_core::{kfld, parseval_defect, partial_derivative, ScalarField};
use kflow_core::kahler_geometry::{
    build_geometry, differential_ops, perturbed_curvature, second_bianchi_residual, KahlerPotential, PotentialMode,
};
use kflow_core::star_products::{fedosov_commutator, fedosov_product_series, NuSeries, FEDOSOV_NU2_COEFF};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Random two-mode `n = 1` potential with amplitudes well inside positivity.
fn potential(np: usize, a: f64, b: f64, phase: f64) -> KahlerPotential {
    let modes = [PotentialMode::new(vec![1, 0], a * S, phase), PotentialMode::new(vec![1, 1], b * S, -phase)];
    KahlerPotential::from_modes(grid(1, np), &modes)
}

fn amp() -> impl Strategy<Value = f64> {
    -0.06..0.06f64
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn derivatives_integrate_to_zero(seed in any::<u64>(), axis in 0usize..4, order in 1usize..4) {
        let spec = grid(2, 8);
        let f = random_low_mode_field(spec, 3, 1.0, 5, &mut rng(seed));
        prop_assert!(partial_derivative(&f, axis, order).unwrap().mean().abs() < 1e-12);
    }

    #[test]
    fn leibniz_and_parseval(seed in any::<u64>(), axis in 0usize..2) {
        let spec = grid(1, 32);
        let (f, g) = seeded_pair(spec, seed, 3);
        let d = |x: &ScalarField| partial_derivative(x, axis, 1).unwrap();
        let lhs = d(&f.mul(&g));
        let rhs = d(&f).mul(&g).add(&f.mul(&d(&g)));
        prop_assert!(lhs.sub(&rhs).sup_norm() < 1e-8);
        prop_assert!(parseval_defect(&f) < 1e-12);
    }

    #[test]
    fn kfld_roundtrip(values in prop::collection::vec(-1e6..1e6f64, 64)) {
        let f = ScalarField::new(grid(1, 8), values).unwrap();
        let back = kfld::decode(&kfld::encode_scalar(&f)).unwrap().to_scalar().unwrap();
        prop_assert_eq!(back.values, f.values);
    }

    #[test]
    fn matrix_roundtrip(rows in 0usize..6, cols in 0usize..6, seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = DMatrix::from_fn(rows, cols, |_, _| rand::Rng::random_range(&mut r, -1.0..1.0));
        prop_assert_eq!(decode_matrix(&encode_matrix(&m)).unwrap(), m);
    }

    #[test]
    fn lambda_inverts_omega(a in amp(), b in amp(), phase in 0.0..6.0f64) {
        let geom = build_geometry(&potential(16, a, b, phase)).unwrap();
        let d = geom.dim();
        for p in 0..geom.spec.total() {
            for i in 0..d {
                for j in 0..d {
                    let s: f64 = (0..d).map(|k| geom.lambda.at(&[i, k])[p] * geom.omega.at(&[k, j])[p]).sum();
                    let delta = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((s - delta).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn second_bianchi_contraction(a in amp(), b in amp(), phase in 0.0..6.0f64) {
        let geom = build_geometry(&potential(64, a, b, phase)).unwrap();
        prop_assert!(second_bianchi_residual(&geom).unwrap() < 1e-7);
    }

    #[test]
    fn poisson_bracket_is_antisymmetric(seed in any::<u64>()) {
        let geom = build_geometry(&common::curved_n1(32)).unwrap();
        let (f, h) = seeded_pair(geom.spec, seed, 2);
        let ops = differential_ops(&geom);
        let fh = ops.poisson(&f, &h).unwrap();
        prop_assert!(fh.add(&ops.poisson(&h, &f).unwrap()).sup_norm() < 1e-12 * fh.sup_norm().max(1.0));
    }

    #[test]
    fn sym3_raise_lower_roundtrip(seed in any::<u64>()) {
        let geom = build_geometry(&common::curved_n1(32)).unwrap();
        let (f, _) = seeded_pair(geom.spec, seed, 2);
        let a = lie_derivative_connection(&f, &geom).unwrap();
        let back = Sym3Tensor::lower_from(&a.raise(&geom), &geom, 1e-8).unwrap();
        prop_assert!(back.t.sub(&a.t).sup_norm() < 1e-12 * a.sup_norm());
    }

    #[test]
    fn omega_e_antisymmetry_and_equivariance(seed in any::<u64>()) {
        let geom = build_geometry(&common::curved_n1(32)).unwrap();
        let (f, h) = seeded_pair(geom.spec, seed, 1);
        let (lf, lh) = (lie_derivative_connection(&f, &geom).unwrap(), lie_derivative_connection(&h, &geom).unwrap());
        let hf = omega_e(&lh, &lf, &geom).unwrap();
        prop_assert!((hf + omega_e(&lf, &lh, &geom).unwrap()).abs() < 1e-10 * hf.abs().max(1.0));
        let mu = moment_map_lc(&geom).unwrap().mu;
        let bracket = geom.integrate(&differential_ops(&geom).poisson(&f, &h).unwrap().mul(&mu)).unwrap();
        prop_assert!((hf + bracket).abs() < 1e-6 * bracket.abs().max(1.0), "{} vs {}", hf, bracket);
    }

    #[test]
    fn mu0_is_connection_independent(seed in any::<u64>(), t in -1e-3..1e-3f64) {
        let geom = build_geometry(&common::curved_n1(32)).unwrap();
        let (f, _) = seeded_pair(geom.spec, seed, 1);
        let a = lie_derivative_connection(&f, &geom).unwrap();
        let pack = perturbed_curvature(&geom, &a.raise(&geom), t).unwrap();
        let mu0 = moment_map(&pack, &geom).unwrap().mu0;
        prop_assert!((mu0 - moment_map_lc(&geom).unwrap().mu0).abs() < 1e-7);
        prop_assert!(mu0.abs() < 1e-7);
    }

    #[test]
    fn lc_commutes_with_grid_translations(sx in -8i64..8, sy in -8i64..8) {
        let dir = [PotentialMode::new(vec![0, 1], 0.04 * S, 0.5)];
        let path = PotentialPath::affine(1, &[], &dir, 0.0, 1.0).unwrap();
        let spec = grid(1, 16);
        let geom0 = build_geometry(&path.potential(spec, 0.0)).unwrap();
        let f = moser_flow(&path, spec, 0.5, 32).unwrap();
        let jt = kflow_core::flows::pullback_endomorphism(&CompatibleACS::standard(&geom0).j, &f).unwrap();
        let jt = CompatibleACS::with_tolerance(jt, &geom0, 1e-5).unwrap();
        let tau = DiscreteDiffeo::translation(spec, &[sx, sy]).unwrap();
        let moved = kflow_core::flows::pullback_endomorphism(&jt.j, &tau).unwrap();
        let moved = CompatibleACS::with_tolerance(moved, &geom0, 1e-5).unwrap();
        let lhs = lc(&moved, &geom0).unwrap().gamma;
        let rhs = pullback_connection(&lc(&jt, &geom0).unwrap().gamma, &tau).unwrap();
        prop_assert!(lhs.sub(&rhs).sup_norm() < 1e-12);
    }

    #[test]
    fn condition_c_sign_on_the_flat_torus(seed in any::<u64>()) {
        let geom = build_geometry(&KahlerPotential::flat(grid(1, 16))).unwrap();
        let f = random_low_mode_field(geom.spec, 2, 1.0, 3, &mut rng(seed));
        let j = CompatibleACS::standard(&geom);
        prop_assert!(condition_c_pairing(&f, &f, &j, &geom).unwrap() <= 1e-10);
    }

    #[test]
    fn moser_flow_defining_residual(a in -0.05..0.05f64, t in 0.1..1.0f64) {
        let dir = [PotentialMode::new(vec![1, 1], a * S, 0.2)];
        let path = PotentialPath::affine(1, &curved_n1_modes(), &dir, 0.0, 1.0).unwrap();
        let f = moser_flow(&path, grid(1, 32), t, 64).unwrap();
        prop_assert!(moser_residual(&path, &f, t).unwrap() < 1e-6);
        prop_assert!(f.inverse_residual < 1e-7);
    }

    #[test]
    fn fedosov_commutator_has_no_second_order_term(seed in any::<u64>()) {
        let geom = build_geometry(&common::curved_n1(32)).unwrap();
        let (f, h) = seeded_pair(geom.spec, seed, 2);
        let c = fedosov_commutator(&f, &h, &geom).unwrap();
        prop_assert!(c.coefficient(2).sup_norm() < 1e-10 * c.coefficient(1).sup_norm().max(1.0));
    }

    #[test]
    fn fedosov_associativity(seed in any::<u64>()) {
        let geom = build_geometry(&common::curved_n1(32)).unwrap();
        let mut r = rng(seed);
        let s: Vec<NuSeries> = (0..3)
            .map(|_| {
                let f = random_low_mode_field(geom.spec, 1, 1.0, 3, &mut r);
                let z = ScalarField::zeros(geom.spec);
                NuSeries::from_real(&[f, z.clone(), z.clone(), z]).unwrap()
            })
            .collect();
        let prod = |a: &NuSeries, b: &NuSeries| fedosov_product_series(a, b, &geom, FEDOSOV_NU2_COEFF).unwrap();
        let left = prod(&prod(&s[0], &s[1]), &s[2]);
        let right = prod(&s[0], &prod(&s[1], &s[2]));
        let scale = left.coefficient(2).sup_norm().max(1.0);
        for k in 0..=2 {
            prop_assert!(left.coefficient(k).re().sub(&right.coefficient(k).re()).sup_norm() < 1e-8 * scale);
        }
    }

    #[test]
    fn series_products_respect_truncation(k1 in 0usize..4, k2 in 0usize..4) {
        let spec = grid(1, 8);
        let a = NuSeries::one(spec, k1);
        let b = NuSeries::one(spec, k2);
        let p = a.mul(&b).unwrap();
        prop_assert_eq!(p.order(), k1.min(k2));
        prop_assert_eq!(p.coefficient(0).re().values, vec![1.0; 64]);
    }

    #[test]
    fn functional_is_nonnegative(a in amp(), b in amp(), phase in 0.0..6.0f64) {
        prop_assert!(functional_f(&potential(16, a, b, phase)).unwrap() >= 0.0);
    }
}
