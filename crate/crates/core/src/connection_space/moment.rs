use super::sym3::{omega_e, Sym3Tensor};
use crate::error::{KflowError, Result};
use crate::grid_core::{ScalarField, Spectrum, TensorField};
use crate::kahler_geometry::kernels::{moment_point, pointwise, sym_pairs};
use crate::kahler_geometry::{
    covariant_derivative, differential_ops, perturbed_curvature, CurvaturePack, GeometryCache,
};
use crate::numerics::{richardson_derivative, sup_norm};

/// Moment map of a symplectic connection: `μ̃`, its mean `μ₀` and `μ = μ̃ − μ₀`.
#[derive(Clone, Debug)]
pub struct MomentMap {
    pub mu_tilde: ScalarField,
    pub mu0: f64,
    pub mu: ScalarField,
    /// `(∇²_{(e_p,e_q)}Ric)(e^p,e^q)`.
    pub laplace_term: ScalarField,
    /// `P(∇)` from the expanded formula.
    pub p_expanded: ScalarField,
    /// `P(∇)` from the wedge definition (n = 2 only).
    pub p_wedge: Option<ScalarField>,
}

/// First and second spectral derivatives of the Ricci tensor:
/// `dric[p][a][b]` and `ddric[q][p][a][b]`, each one array per component.
pub(crate) fn ricci_derivatives(ric: &TensorField) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let spec = ric.spec;
    let d = spec.dim();
    let total = spec.total();
    let mut dric = vec![Vec::new(); d * d * d];
    let mut ddric = vec![Vec::new(); d * d * d * d];
    for (a, b) in sym_pairs(d) {
        let s = Spectrum::forward(&spec, ric.at(&[a, b]));
        for p in 0..d {
            let mut al = vec![0; d];
            al[p] = 1;
            let v = s.derivative(&al);
            dric[(p * d + a) * d + b] = v.clone();
            dric[(p * d + b) * d + a] = v;
            for q in p..d {
                let mut al = vec![0; d];
                al[p] += 1;
                al[q] += 1;
                let v = s.derivative(&al);
                for (x, y) in [(p, q), (q, p)] {
                    ddric[((x * d + y) * d + a) * d + b] = v.clone();
                    ddric[((x * d + y) * d + b) * d + a] = v.clone();
                }
            }
        }
    }
    debug_assert!(dric.iter().all(|v| v.len() == total));
    (dric, ddric)
}

fn moment_fields(pack: &CurvaturePack, geom: &GeometryCache, wedge: bool) -> (Vec<f64>, Vec<f64>, Option<Vec<f64>>) {
    let spec = geom.spec;
    let d = spec.dim();
    let (d2, d3, d4) = (d * d, d * d * d, d * d * d * d);
    let (dric, ddric) = ricci_derivatives(&pack.ricci);
    let nout = if wedge { 3 } else { 2 };
    let cm = pointwise(spec.total(), nout, |p, out| {
        let col = |t: &TensorField, n: usize| -> Vec<f64> { (0..n).map(|c| t.comp(c)[p]).collect() };
        let gamma = col(&pack.gamma, d3);
        let dgamma = col(&pack.dgamma, d4);
        let rm = col(&pack.riemann, d4);
        let ric = col(&pack.ricci, d2);
        let lam = col(&geom.lambda, d2);
        let om = col(&geom.omega, d2);
        let dr: Vec<f64> = dric.iter().map(|v| v[p]).collect();
        let ddr: Vec<f64> = ddric.iter().map(|v| v[p]).collect();
        let parts = moment_point(d, &gamma, &dgamma, &rm, &ric, &dr, &ddr, &lam, &om, wedge);
        out[0] = parts.laplace_term;
        out[1] = parts.p_expanded;
        if wedge {
            out[2] = parts.p_wedge.unwrap_or(f64::NAN);
        }
    });
    let mut it = cm.into_iter();
    let lt = it.next().unwrap();
    let pe = it.next().unwrap();
    let pw = it.next();
    (lt, pe, pw)
}

/// Moment map `μ̃ = (∇²Ric)(e^p,e^q) − ½Ric_{pq}Ric^{pq} + ¼R_{pqrs}R^{pqrs}`,
/// normalized against `ω_φ^n/n!`. For `n = 2` the wedge form of `P` is
/// evaluated as well.
pub fn moment_map(pack: &CurvaturePack, geom: &GeometryCache) -> Result<MomentMap> {
    if pack.ricci.spec != geom.spec {
        return Err(KflowError::GridMismatch);
    }
    let spec = geom.spec;
    let wedge = spec.n == 2;
    let (lt, pe, pw) = moment_fields(pack, geom, wedge);
    let mu_tilde: Vec<f64> = lt.iter().zip(&pe).map(|(a, b)| a + b).collect();
    let mu_tilde = ScalarField { spec, values: mu_tilde };
    let mu0 = geom.integrate(&mu_tilde)?;
    let mu = mu_tilde.map(|v| v - mu0);
    Ok(MomentMap {
        mu_tilde,
        mu0,
        mu,
        laplace_term: ScalarField { spec, values: lt },
        p_expanded: ScalarField { spec, values: pe },
        p_wedge: pw.map(|v| ScalarField { spec, values: v }),
    })
}

/// `P(∇)` from `P ω^n/n! = ½ tr(R∘∧R) ∧ ω^{n−2}/(n−2)!`; only defined for `n ≥ 2`.
pub fn wedge_p(pack: &CurvaturePack, geom: &GeometryCache) -> Result<ScalarField> {
    if geom.spec.n < 2 {
        return Err(KflowError::NotApplicable("the wedge form of P needs complex dimension at least 2".into()));
    }
    let (_, _, pw) = moment_fields(pack, geom, true);
    Ok(ScalarField { spec: geom.spec, values: pw.unwrap() })
}

/// Moment map of the Levi-Civita connection of the cache.
pub fn moment_map_lc(geom: &GeometryCache) -> Result<MomentMap> {
    moment_map(&CurvaturePack::levi_civita(geom), geom)
}

/// `L_{X_F}∇` lowered with `ω`: `A_{bcs} = ω_{ds}(∇²_{(b,c)}X_F + R(X_F,∂_b)∂_c)^d`.
/// The symmetry of the result is checked (residual above 1e-8 is an error).
pub fn lie_derivative_connection(f: &ScalarField, geom: &GeometryCache) -> Result<Sym3Tensor> {
    let d = geom.dim();
    let total = geom.spec.total();
    let x = differential_ops(geom).hamiltonian_field(f)?;
    let xt = TensorField::from_components(
        geom.spec,
        vec![crate::grid_core::Variance::Contra],
        x.iter().map(|s| s.values.clone()).collect(),
    )?;
    let nnx = covariant_derivative(&xt, geom, 2)?; // [c][b][d] = (∇_c∇X)_b^d
    let mut a_up = TensorField::zeros(geom.spec, geom.christoffel.variance.clone()); // [d][b][c]
    for b in 0..d {
        for c in 0..d {
            for dd in 0..d {
                let mut acc = nnx.at(&[b, c, dd]).to_vec();
                for a in 0..d {
                    let r = geom.riemann.at(&[a, b, c, dd]);
                    let xa = &x[a].values;
                    for p in 0..total {
                        acc[p] += xa[p] * r[p];
                    }
                }
                a_up.comp_mut((dd * d + b) * d + c).copy_from_slice(&acc);
            }
        }
    }
    Sym3Tensor::lower_from(&a_up, geom, 1e-8)
}

/// `|d/dt|₀ ∫ μ̃(∇+tA) F ω^n/n! − Ω^𝓔(L_{X_F}∇, A)|`, with the derivative
/// by Richardson-extrapolated central differences (steps `h`, `h/2`).
pub fn moment_identity_residual(f: &ScalarField, a: &Sym3Tensor, geom: &GeometryCache, h: f64) -> Result<f64> {
    let (lhs, rhs) = moment_identity_sides(f, a, geom, h)?;
    Ok((lhs - rhs).abs())
}

/// Both sides of the moment identity `(d/dt ∫μ̃(∇+tA)F, Ω^𝓔(L_{X_F}∇, A))`.
pub fn moment_identity_sides(f: &ScalarField, a: &Sym3Tensor, geom: &GeometryCache, h: f64) -> Result<(f64, f64)> {
    if !(1e-6..=1e-2).contains(&h) {
        return Err(KflowError::InvalidGrid(format!("step {h} outside [1e-6, 1e-2]")));
    }
    let a_raised = a.raise(geom);
    let mut err = None;
    let lhs = richardson_derivative(
        |t| match perturbed_curvature(geom, &a_raised, t).and_then(|pack| moment_map(&pack, geom)) {
            Ok(m) => geom.inner(&m.mu_tilde, f).unwrap_or(f64::NAN),
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        h,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let lf = lie_derivative_connection(f, geom)?;
    let rhs = omega_e(&lf, a, geom)?;
    Ok((lhs, rhs))
}

/// Relative sup-difference between two fields, normalized by the first.
/// When both fields are at roundoff level (sup below `1e-12`) the absolute
/// difference is returned, so a vanishing field does not blow up the ratio.
pub fn relative_sup_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    let diff: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    let scale = sup_norm(&a.values).max(sup_norm(&b.values));
    if scale < 1e-12 {
        sup_norm(&diff)
    } else {
        sup_norm(&diff) / sup_norm(&a.values).max(1e-300)
    }
}
