use super::cache::GeometryCache;
use super::kernels::{pointwise, ricci, riemann};
use crate::error::{KflowError, Result};
use crate::grid_core::{gradient, partial_derivative_tensor, ScalarField, Spectrum, Symmetry, TensorField, Variance};
use std::borrow::Cow;

/// Curvature data of a symplectic connection on `(M, ω_φ)`.
#[derive(Clone, Debug)]
pub struct CurvaturePack<'a> {
    /// `Γ^d_{ab}` as `[d][a][b]`.
    pub gamma: Cow<'a, TensorField>,
    /// `∂_cΓ^d_{ab}` as `[c][d][a][b]`.
    pub dgamma: Cow<'a, TensorField>,
    pub riemann: Cow<'a, TensorField>,
    pub ricci: Cow<'a, TensorField>,
    /// `g^{bc}Ric_{bc}` with the Kähler metric of the cache.
    pub scal: Cow<'a, ScalarField>,
}

impl<'a> CurvaturePack<'a> {
    /// The Levi-Civita pack, borrowed from the cache.
    pub fn levi_civita(geom: &'a GeometryCache) -> Self {
        CurvaturePack {
            gamma: Cow::Borrowed(&geom.christoffel),
            dgamma: Cow::Borrowed(&geom.dchristoffel),
            riemann: Cow::Borrowed(&geom.riemann),
            ricci: Cow::Borrowed(&geom.ricci),
            scal: Cow::Borrowed(&geom.scal),
        }
    }
}

/// Sup-norm of `∇ω` for connection coefficients `gamma`.
pub fn nabla_omega_residual(gamma: &TensorField, geom: &GeometryCache) -> f64 {
    let d = geom.dim();
    let total = geom.spec.total();
    let domega: Vec<Vec<ScalarField>> =
        (0..d * d).map(|c| gradient(&ScalarField { spec: geom.spec, values: geom.omega.comp(c).to_vec() })).collect();
    let mut worst = 0.0_f64;
    for a in 0..d {
        for b in 0..d {
            for c in (b + 1)..d {
                for p in 0..total {
                    let mut v = domega[b * d + c][a].values[p];
                    for m in 0..d {
                        v -= gamma.at(&[m, a, b])[p] * geom.omega.at(&[m, c])[p]
                            + gamma.at(&[m, a, c])[p] * geom.omega.at(&[b, m])[p];
                    }
                    worst = worst.max(v.abs());
                }
            }
        }
    }
    worst
}

/// Relative asymmetry of `Γ^d_{ab}` in its lower indices.
pub fn torsion_residual(gamma: &TensorField) -> f64 {
    let mut g = gamma.clone();
    g.symmetries = vec![Symmetry::symmetric(1, 2, 3)];
    g.symmetry_residual()
}

/// Riemann and Ricci tensors from `(Γ, ∂Γ)`, pointwise.
pub(crate) fn curvature_from(
    gamma: &TensorField,
    dgamma: &TensorField,
    geom: &GeometryCache,
) -> (TensorField, TensorField, ScalarField) {
    let spec = geom.spec;
    let d = spec.dim();
    let (d2, d3, d4) = (d * d, d * d * d, d * d * d * d);
    let cm = pointwise(spec.total(), d4 + d2 + 1, |p, out| {
        let gpt: Vec<f64> = (0..d3).map(|c| gamma.comp(c)[p]).collect();
        let dgpt: Vec<f64> = (0..d4).map(|c| dgamma.comp(c)[p]).collect();
        let rm = riemann(d, &gpt, &dgpt);
        let ric = ricci(d, &rm);
        let mut scal = 0.0;
        for i in 0..d2 {
            scal += geom.metric_inv.comp(i)[p] * ric[i];
        }
        out[..d4].copy_from_slice(&rm);
        out[d4..d4 + d2].copy_from_slice(&ric);
        out[d4 + d2] = scal;
    });
    use Variance::{Co, Contra};
    let mut it = cm.into_iter();
    let mut rm = TensorField::zeros(spec, vec![Co, Co, Co, Contra]);
    for c in 0..d4 {
        rm.comp_mut(c).copy_from_slice(&it.next().unwrap());
    }
    rm.symmetries = vec![Symmetry::antisymmetric(0, 1, 4)];
    let mut ric = TensorField::zeros(spec, vec![Co, Co]);
    for c in 0..d2 {
        ric.comp_mut(c).copy_from_slice(&it.next().unwrap());
    }
    let scal = ScalarField { spec, values: it.next().unwrap() };
    (rm, ric, scal)
}

/// Spectral `∂_cΓ^d_{ab}` as `[c][d][a][b]`.
pub(crate) fn spectral_dgamma(gamma: &TensorField) -> TensorField {
    let spec = gamma.spec;
    let d = spec.dim();
    let d3 = d * d * d;
    let mut out = TensorField::zeros(spec, vec![Variance::Co, Variance::Contra, Variance::Co, Variance::Co]);
    for comp in 0..d3 {
        let s = Spectrum::forward(&spec, gamma.comp(comp));
        for c in 0..d {
            let mut al = vec![0; d];
            al[c] = 1;
            out.comp_mut(c * d3 + comp).copy_from_slice(&s.derivative(&al));
        }
    }
    out
}

fn check_connection(gamma: &TensorField, geom: &GeometryCache) -> Result<()> {
    if gamma.spec != geom.spec || gamma.rank() != 3 {
        return Err(KflowError::GridMismatch);
    }
    let tors = torsion_residual(gamma);
    if tors > 1e-10 {
        return Err(KflowError::SymmetryViolation { what: "connection coefficients (torsion)".into(), residual: tors });
    }
    let residual = nabla_omega_residual(gamma, geom);
    if residual > 1e-8 {
        return Err(KflowError::SymplecticityViolation { residual });
    }
    Ok(())
}

/// Curvature of an arbitrary symplectic connection given by its coefficients.
/// `∂Γ` is obtained spectrally.
pub fn connection_curvature(gamma: &TensorField, geom: &GeometryCache) -> Result<CurvaturePack<'static>> {
    check_connection(gamma, geom)?;
    let dgamma = spectral_dgamma(gamma);
    let (rm, ric, scal) = curvature_from(gamma, &dgamma, geom);
    Ok(CurvaturePack {
        gamma: Cow::Owned(gamma.clone()),
        dgamma: Cow::Owned(dgamma),
        riemann: Cow::Owned(rm),
        ricci: Cow::Owned(ric),
        scal: Cow::Owned(scal),
    })
}

/// Curvature of `∇^φ + t·Â` where `Â^d_{bc} = A_{bcs}Λ^{sd}`.
///
/// The Levi-Civita part of `∂Γ` is taken exactly from the cache and only the
/// perturbation is differentiated spectrally.
pub fn perturbed_curvature(geom: &GeometryCache, a_raised: &TensorField, t: f64) -> Result<CurvaturePack<'static>> {
    let mut gamma = geom.christoffel.clone();
    for (g, a) in gamma.components.iter_mut().zip(&a_raised.components) {
        *g += t * a;
    }
    check_connection(&gamma, geom)?;
    let mut dgamma = spectral_dgamma(a_raised);
    for (dg, lc) in dgamma.components.iter_mut().zip(&geom.dchristoffel.components) {
        *dg = t * *dg + lc;
    }
    let (rm, ric, scal) = curvature_from(&gamma, &dgamma, geom);
    Ok(CurvaturePack {
        gamma: Cow::Owned(gamma),
        dgamma: Cow::Owned(dgamma),
        riemann: Cow::Owned(rm),
        ricci: Cow::Owned(ric),
        scal: Cow::Owned(scal),
    })
}

/// Covariant derivative with respect to coefficients `gamma`, applied
/// `times` times. Each application prepends one covariant slot:
/// `(∇T)[a][i..] = ∂_aT[i..] + Σ_up Γ^{i}_{am}T[..m..] − Σ_down Γ^m_{ai}T[..m..]`.
pub fn covariant_derivative_with(t: &TensorField, gamma: &TensorField, times: usize) -> Result<TensorField> {
    let mut cur = t.clone();
    for _ in 0..times {
        cur = nabla_once(&cur, gamma)?;
    }
    Ok(cur)
}

/// Levi-Civita covariant derivative of the cache, applied `times` times.
pub fn covariant_derivative(t: &TensorField, geom: &GeometryCache, times: usize) -> Result<TensorField> {
    if t.spec != geom.spec {
        return Err(KflowError::GridMismatch);
    }
    covariant_derivative_with(t, &geom.christoffel, times)
}

fn nabla_once(t: &TensorField, gamma: &TensorField) -> Result<TensorField> {
    let r = t.rank();
    if r + 1 > 6 {
        return Err(KflowError::RankOverflow(r + 1));
    }
    let spec = t.spec;
    let d = spec.dim();
    let total = spec.total();
    let mut variance = vec![Variance::Co];
    variance.extend(t.variance.iter().cloned());
    let mut out = TensorField::zeros(spec, variance);
    let ncomp = t.ncomp();
    for a in 0..d {
        let da = partial_derivative_tensor(t, a, 1)?;
        for c in 0..ncomp {
            let idx = t.multi_index(c);
            let mut acc = da.comp(c).to_vec();
            for (s, var) in t.variance.iter().enumerate() {
                for m in 0..d {
                    let mut midx = idx.clone();
                    midx[s] = m;
                    let tm = t.at(&midx);
                    let (g, sign) = match var {
                        Variance::Contra => (gamma.at(&[idx[s], a, m]), 1.0),
                        Variance::Co => (gamma.at(&[m, a, idx[s]]), -1.0),
                    };
                    for p in 0..total {
                        acc[p] += sign * g[p] * tm[p];
                    }
                }
            }
            out.comp_mut(a * ncomp + c).copy_from_slice(&acc);
        }
    }
    Ok(out)
}

/// Sup-norm of the cyclic sum `R(a,b)c + R(b,c)a + R(c,a)b`.
pub fn first_bianchi_residual(rm: &TensorField) -> f64 {
    let d = rm.spec.dim();
    let mut worst = 0.0_f64;
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                for e in 0..d {
                    let x = rm.at(&[a, b, c, e]);
                    let y = rm.at(&[b, c, a, e]);
                    let z = rm.at(&[c, a, b, e]);
                    for p in 0..x.len() {
                        worst = worst.max((x[p] + y[p] + z[p]).abs());
                    }
                }
            }
        }
    }
    worst
}

/// Sup-norm of `Λ^{kl}(∇_lRic)(∂_k,·) + ½ dScal(J·)` (contracted second Bianchi identity
/// in the Kähler case).
pub fn second_bianchi_residual(geom: &GeometryCache) -> Result<f64> {
    let d = geom.dim();
    let total = geom.spec.total();
    let nric = covariant_derivative(&geom.ricci, geom, 1)?;
    let dscal = gradient(&geom.scal);
    let jm = geom.j_matrix();
    let mut worst = 0.0_f64;
    for c in 0..d {
        let mut v = vec![0.0; total];
        for k in 0..d {
            for l in 0..d {
                let lam = geom.lambda.at(&[k, l]);
                let nr = nric.at(&[l, k, c]);
                for p in 0..total {
                    v[p] += lam[p] * nr[p];
                }
            }
        }
        for a in 0..d {
            let j = jm[a * d + c];
            if j != 0.0 {
                for p in 0..total {
                    v[p] += 0.5 * j * dscal[a].values[p];
                }
            }
        }
        worst = worst.max(crate::numerics::sup_norm(&v));
    }
    Ok(worst)
}
