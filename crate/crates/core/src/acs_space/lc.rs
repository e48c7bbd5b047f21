use super::structure::{endo_mul, i_apply, lie_derivative_j, metric_of, omega_j, ACSVariation, CompatibleACS};
use crate::connection_space::{omega_e, Sym3Tensor};
use crate::error::{KflowError, Result};
use crate::flows::{moser_flow, pullback_endomorphism, PotentialPath};
use crate::grid_core::{gradient, GridSpec, ScalarField, TensorField, Variance};
use crate::kahler_geometry::kernels::{invert, pointwise, ricci, riemann};
use crate::kahler_geometry::{
    build_geometry, covariant_derivative_with, curvature_from, spectral_dgamma, CurvaturePack, GeometryCache,
};
use crate::numerics::{richardson_derivative, weighted_mean};
use nalgebra::{DMatrix, DVector};
use std::borrow::Cow;

/// Relative residual allowed in the pointwise `lc_*` solve.
pub const LC_STAR_TOL: f64 = 1e-7;

/// Measured ratio `Scal(J) / Scal(g_J)` between the Hermitian scalar curvature
/// in the moment-map normalization and the Riemannian one (integrable case).
pub const HERMITIAN_SCAL_RATIO: f64 = 2.0;

/// Levi-Civita connection of `g_J = ω(·, J·)`.
#[derive(Clone, Debug)]
pub struct LcConnection {
    /// `Γ^d_{ab}` as `[d][a][b]`.
    pub gamma: TensorField,
    pub metric: TensorField,
    pub metric_inv: TensorField,
}

impl LcConnection {
    /// Curvature pack for the moment map on `(M, ω)`; `scal` uses `g_J`.
    pub fn curvature_pack(&self, geom: &GeometryCache) -> CurvaturePack<'static> {
        let dgamma = spectral_dgamma(&self.gamma);
        let (rm, ric, _) = curvature_from(&self.gamma, &dgamma, geom);
        let scal = scal_with(&ric, &self.metric_inv);
        CurvaturePack {
            gamma: Cow::Owned(self.gamma.clone()),
            dgamma: Cow::Owned(dgamma),
            riemann: Cow::Owned(rm),
            ricci: Cow::Owned(ric),
            scal: Cow::Owned(scal),
        }
    }
}

fn scal_with(ric: &TensorField, ginv: &TensorField) -> ScalarField {
    let d = ric.spec.dim();
    let mut v = vec![0.0; ric.spec.total()];
    for c in 0..d * d {
        v.iter_mut().zip(ric.comp(c).iter().zip(ginv.comp(c))).for_each(|(o, (r, g))| *o += r * g);
    }
    ScalarField { spec: ric.spec, values: v }
}

/// `lc(J)`: spectral Levi-Civita connection of `g_J = ω(·, J·)`.
pub fn lc(j: &CompatibleACS, geom: &GeometryCache) -> Result<LcConnection> {
    if j.j.spec != geom.spec {
        return Err(KflowError::GridMismatch);
    }
    let spec = geom.spec;
    let d = spec.dim();
    let total = spec.total();
    let gm = pointwise(total, 2 * d * d, |p, out| {
        let om: Vec<f64> = (0..d * d).map(|c| geom.omega.comp(c)[p]).collect();
        let jp: Vec<f64> = (0..d * d).map(|c| j.j.comp(c)[p]).collect();
        let g = metric_of(&om, &jp, d);
        out[..d * d].copy_from_slice(&g);
        out[d * d..].copy_from_slice(&invert(&g, d));
    });
    let co2 = vec![Variance::Co, Variance::Co];
    let metric = TensorField::from_components(spec, co2.clone(), gm[..d * d].to_vec())?;
    let metric_inv =
        TensorField::from_components(spec, vec![Variance::Contra, Variance::Contra], gm[d * d..].to_vec())?;
    // dg[c][ab]
    let dg: Vec<Vec<ScalarField>> =
        (0..d * d).map(|c| gradient(&ScalarField { spec, values: metric.comp(c).to_vec() })).collect();
    let res = pointwise(total, d * d * d, |p, out| {
        let dgp = |c: usize, a: usize, b: usize| dg[a * d + b][c].values[p];
        for e in 0..d {
            for a in 0..d {
                for b in 0..d {
                    let low = 0.5 * (dgp(a, e, b) + dgp(b, e, a) - dgp(e, a, b));
                    for dd in 0..d {
                        out[(dd * d + a) * d + b] += metric_inv.comp(dd * d + e)[p] * low;
                    }
                }
            }
        }
    });
    let gamma = TensorField::from_components(spec, geom.christoffel.variance.clone(), res)?
        .with_symmetries(geom.christoffel.symmetries.clone());
    Ok(LcConnection { gamma, metric, metric_inv })
}

/// Riemannian scalar curvature of `g_J`.
pub fn riemannian_scal(conn: &LcConnection) -> ScalarField {
    let spec = conn.gamma.spec;
    let d = spec.dim();
    let dgamma = spectral_dgamma(&conn.gamma);
    let v = pointwise(spec.total(), 1, |p, out| {
        let g: Vec<f64> = (0..d * d * d).map(|c| conn.gamma.comp(c)[p]).collect();
        let dg: Vec<f64> = (0..d * d * d * d).map(|c| dgamma.comp(c)[p]).collect();
        let ric = ricci(d, &riemann(d, &g, &dg));
        out[0] = (0..d * d).map(|c| ric[c] * conn.metric_inv.comp(c)[p]).sum();
    });
    ScalarField { spec, values: v.into_iter().next().unwrap() }
}

fn is_standard(j: &CompatibleACS, geom: &GeometryCache) -> bool {
    let jm = geom.j_matrix();
    (0..jm.len()).all(|c| j.j.comp(c).iter().all(|&v| v == jm[c]))
}

/// Connection coefficients of `lc(J)`; the cache's Levi-Civita connection
/// when `J` is the standard structure.
fn gamma_for<'a>(j: &CompatibleACS, geom: &'a GeometryCache) -> Result<Cow<'a, TensorField>> {
    if is_standard(j, geom) {
        Ok(Cow::Borrowed(&geom.christoffel))
    } else {
        Ok(Cow::Owned(lc(j, geom)?.gamma))
    }
}

fn sym3_basis(d: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for i in 0..d {
        for j in i..d {
            for k in j..d {
                out.push([i, j, k]);
            }
        }
    }
    out
}

/// `lc_{*J}(A)` as an `ω`-lowered symmetric 3-tensor, the unique `B` with
/// `B(X)JY − J B(X)Y + (∇_XA)Y = 0`, solved pointwise by least squares.
/// Returns `B` and the relative residual of the solve.
pub fn lc_star_with_residual(a: &ACSVariation, j: &CompatibleACS, geom: &GeometryCache) -> Result<(Sym3Tensor, f64)> {
    if a.a.spec != geom.spec {
        return Err(KflowError::GridMismatch);
    }
    let spec = geom.spec;
    let d = spec.dim();
    let total = spec.total();
    let gamma = gamma_for(j, geom)?;
    let na = covariant_derivative_with(&a.a, &gamma, 1)?; // [b][a][c]
    let basis = sym3_basis(d);
    let nb = basis.len();
    let d3 = d * d * d;
    let res = pointwise(total, nb + 3, |p, out| {
        let lam: Vec<f64> = (0..d * d).map(|c| geom.lambda.comp(c)[p]).collect();
        let jp: Vec<f64> = (0..d * d).map(|c| j.j.comp(c)[p]).collect();
        let mut m = DMatrix::zeros(d3, nb);
        for (col, idx) in basis.iter().enumerate() {
            // raised basis element: B^a_{bc} = L_{bcs}Λ^{sa}
            let mut low = vec![0.0; d3];
            for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                low[(idx[perm[0]] * d + idx[perm[1]]) * d + idx[perm[2]]] = 1.0;
            }
            let raised =
                |aa: usize, b: usize, c: usize| (0..d).map(|s| low[(b * d + c) * d + s] * lam[s * d + aa]).sum::<f64>();
            for aa in 0..d {
                for b in 0..d {
                    for c in 0..d {
                        let mut v = 0.0;
                        for e in 0..d {
                            v += raised(aa, b, e) * jp[e * d + c] - jp[aa * d + e] * raised(e, b, c);
                        }
                        m[((aa * d + b) * d + c, col)] = v;
                    }
                }
            }
        }
        let mut rhs = DVector::zeros(d3);
        for aa in 0..d {
            for b in 0..d {
                for c in 0..d {
                    rhs[(aa * d + b) * d + c] = -na.comp(b * d * d + aa * d + c)[p];
                }
            }
        }
        let svd = m.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let x = svd.solve(&rhs, 1e-12 * smax).unwrap_or_else(|_| DVector::zeros(nb));
        let r = (&m * &x - &rhs).amax();
        out[..nb].copy_from_slice(x.as_slice());
        out[nb] = r;
        out[nb + 1] = rhs.amax();
        out[nb + 2] = if smax > 0.0 { smin / smax } else { 0.0 };
    });
    if let Some((p, _)) = res[nb + 2].iter().enumerate().find(|(_, v)| !(**v > 1e-10)) {
        return Err(KflowError::SingularSolve { point: p });
    }
    let rmax = res[nb].iter().fold(0.0_f64, |m, v| m.max(*v));
    let scale = res[nb + 1].iter().fold(0.0_f64, |m, v| m.max(*v));
    let residual = if scale > 0.0 { rmax / scale } else { rmax };
    let mut t = TensorField::covariant(spec, 3);
    for (col, idx) in basis.iter().enumerate() {
        for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            t.comp_mut((idx[perm[0]] * d + idx[perm[1]]) * d + idx[perm[2]]).copy_from_slice(&res[col]);
        }
    }
    Ok((Sym3Tensor::with_tolerance(t, 1e-12)?, residual))
}

/// [`lc_star_with_residual`], rejecting relative residuals above [`LC_STAR_TOL`].
pub fn lc_star(a: &ACSVariation, j: &CompatibleACS, geom: &GeometryCache) -> Result<Sym3Tensor> {
    let (b, r) = lc_star_with_residual(a, j, geom)?;
    if r > LC_STAR_TOL {
        return Err(KflowError::InvariantViolation { what: "lc_* linear solve".into(), residual: r });
    }
    Ok(b)
}

/// `sup|½(B(X) + J B(X) J) + ½∇_X(JA)| / sup|∇(JA)|`: the `J`-anti-linear part
/// of `B = lc_*(A)` against its closed form.
pub fn anti_linear_residual(a: &ACSVariation, b: &Sym3Tensor, j: &CompatibleACS, geom: &GeometryCache) -> Result<f64> {
    let d = geom.dim();
    let total = geom.spec.total();
    let gamma = gamma_for(j, geom)?;
    let nja = covariant_derivative_with(&endo_mul(&j.j, &a.a), &gamma, 1)?; // [x][a][y]
    let braised = b.raise(geom); // [a][x][y]
    let mut worst = 0.0_f64;
    for p in 0..total {
        let jp: Vec<f64> = (0..d * d).map(|c| j.j.comp(c)[p]).collect();
        for x in 0..d {
            // E^a_y = B^a_{xy}
            let e = |aa: usize, y: usize| braised.comp((aa * d + x) * d + y)[p];
            for aa in 0..d {
                for y in 0..d {
                    let mut jej = 0.0;
                    for u in 0..d {
                        for v in 0..d {
                            jej += jp[aa * d + u] * e(u, v) * jp[v * d + y];
                        }
                    }
                    let v = 0.5 * (e(aa, y) + jej) + 0.5 * nja.comp(x * d * d + aa * d + y)[p];
                    worst = worst.max(v.abs());
                }
            }
        }
    }
    let scale = nja.sup_norm();
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// `(lc^*Ω^𝓔)_J(L_{X_H}J, J L_{X_F}J) = Ω^𝓔(lc_*(L_{X_H}J), lc_*(J L_{X_F}J))`.
pub fn condition_c_pairing(f: &ScalarField, h: &ScalarField, j: &CompatibleACS, geom: &GeometryCache) -> Result<f64> {
    let ah = lie_derivative_j(h, j, geom)?;
    let af = lie_derivative_j(f, j, geom)?;
    let bh = lc_star(&ah, j, geom)?;
    let bf = lc_star(&i_apply(&af, j), j, geom)?;
    omega_e(&bh, &bf, geom)
}

/// `sup` of the antisymmetric part in `(X,Y)` of `J((∇A)(X)Y) − (∇A)(JX)Y`.
pub fn nijenhuis_variation_defect(a: &ACSVariation, j: &CompatibleACS, geom: &GeometryCache) -> Result<f64> {
    let d = geom.dim();
    let total = geom.spec.total();
    let gamma = gamma_for(j, geom)?;
    let na = covariant_derivative_with(&a.a, &gamma, 1)?; // [x][a][y]
    let mut worst = 0.0_f64;
    for p in 0..total {
        let t = |aa: usize, x: usize, y: usize| {
            let mut s = 0.0;
            for e in 0..d {
                s += j.j.comp(aa * d + e)[p] * na.comp(x * d * d + e * d + y)[p];
                s -= j.j.comp(e * d + x)[p] * na.comp(e * d * d + aa * d + y)[p];
            }
            s
        };
        for aa in 0..d {
            for x in 0..d {
                for y in (x + 1)..d {
                    worst = worst.max(0.5 * (t(aa, x, y) - t(aa, y, x)).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// `J_t = f_t⁻¹.J` for the Moser flow of `path`, as a compatible structure on
/// `(M, ω_{φ(0)})`. Compatibility is only as good as the flow, so it is
/// validated at `tol`.
pub fn moser_structure(
    path: &PotentialPath,
    geom0: &GeometryCache,
    t: f64,
    steps: usize,
    tol: f64,
) -> Result<CompatibleACS> {
    let f = moser_flow(path, geom0.spec, t, steps)?;
    let j = pullback_endomorphism(&CompatibleACS::standard(geom0).j, &f)?;
    CompatibleACS::with_tolerance(j, geom0, tol)
}

/// Both sides of `Ω^𝓙(L_{X_F}J, A) = d/dt|₀ ∫F·Scal(J_t) ω^n/n!`, with
/// `A = −J L_{X_ψ}J` (`ψ = φ̇(0)`) and `Scal` the Riemannian scalar curvature
/// of `g_{J_t}`. The derivative is Richardson-extrapolated with step `h`.
pub fn scal_moment_sides(
    f: &ScalarField,
    path: &PotentialPath,
    spec: GridSpec,
    h: f64,
    steps: usize,
) -> Result<(f64, f64)> {
    let geom0 = build_geometry(&path.potential(spec, 0.0))?;
    f.check_grid(&spec)?;
    let j = CompatibleACS::standard(&geom0);
    let psi = path.phi_dot(0.0).sample(spec);
    let a = i_apply(&lie_derivative_j(&psi, &j, &geom0)?, &j).scale(-1.0);
    let lhs = omega_j(&lie_derivative_j(f, &j, &geom0)?, &a, &j, &geom0)?;
    let mut err = None;
    let rhs = richardson_derivative(
        |t| {
            let r = moser_structure(path, &geom0, t, steps, 1e-5)
                .and_then(|jt| lc(&jt, &geom0))
                .map(|c| weighted_mean(&riemannian_scal(&c).mul(f).values, &geom0.volume.values));
            r.unwrap_or_else(|e| {
                err = Some(e);
                f64::NAN
            })
        },
        h,
    );
    if let Some(e) = err {
        return Err(e);
    }
    Ok((lhs, rhs))
}

/// `|LHS − HERMITIAN_SCAL_RATIO·RHS|` of [`scal_moment_sides`].
pub fn scal_moment_residual(
    f: &ScalarField,
    path: &PotentialPath,
    spec: GridSpec,
    h: f64,
    steps: usize,
) -> Result<f64> {
    let (l, r) = scal_moment_sides(f, path, spec, h, steps)?;
    Ok((l - HERMITIAN_SCAL_RATIO * r).abs())
}
