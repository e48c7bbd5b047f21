use crate::error::{KflowError, Result};
use crate::grid_core::{partial_derivative_tensor, ScalarField, TensorField, Variance};
use crate::kahler_geometry::{differential_ops, GeometryCache};
use crate::numerics::weighted_mean;

/// Nijenhuis residual below which a structure counts as integrable.
pub const INTEGRABLE_TOL: f64 = 1e-8;

pub(crate) fn endo_zeros(geom: &GeometryCache) -> TensorField {
    TensorField::zeros(geom.spec, vec![Variance::Contra, Variance::Co])
}

/// Pointwise product `(AB)^a_c = A^a_b B^b_c`.
pub(crate) fn endo_mul(a: &TensorField, b: &TensorField) -> TensorField {
    let d = a.spec.dim();
    let total = a.spec.total();
    let mut out = TensorField::zeros(a.spec, vec![Variance::Contra, Variance::Co]);
    for i in 0..d {
        for k in 0..d {
            let mut acc = vec![0.0; total];
            for j in 0..d {
                let (x, y) = (a.comp(i * d + j), b.comp(j * d + k));
                for p in 0..total {
                    acc[p] += x[p] * y[p];
                }
            }
            out.comp_mut(i * d + k).copy_from_slice(&acc);
        }
    }
    out
}

/// Pointwise trace.
pub(crate) fn endo_trace(a: &TensorField) -> Vec<f64> {
    let d = a.spec.dim();
    let mut out = vec![0.0; a.spec.total()];
    for i in 0..d {
        out.iter_mut().zip(a.comp(i * d + i)).for_each(|(o, v)| *o += v);
    }
    out
}

/// An `ω`-compatible almost complex structure `J^a_b` (component `a·d + b`).
#[derive(Clone, Debug)]
pub struct CompatibleACS {
    pub j: TensorField,
    /// Sup-norm of the Nijenhuis tensor.
    pub nijenhuis: f64,
}

impl CompatibleACS {
    /// The constant structure of the coordinate frame.
    pub fn standard(geom: &GeometryCache) -> Self {
        let d = geom.dim();
        let jm = geom.j_matrix();
        let mut j = endo_zeros(geom);
        for c in 0..d * d {
            j.comp_mut(c).iter_mut().for_each(|v| *v = jm[c]);
        }
        CompatibleACS { j, nijenhuis: 0.0 }
    }

    /// Validates `J² = −Id`, `ω(J·,J·) = ω` and positivity of `ω(·,J·)` to `tol`.
    pub fn with_tolerance(j: TensorField, geom: &GeometryCache, tol: f64) -> Result<Self> {
        if j.spec != geom.spec || j.rank() != 2 {
            return Err(KflowError::GridMismatch);
        }
        let d = geom.dim();
        let total = geom.spec.total();
        let jj = endo_mul(&j, &j);
        let mut sq = 0.0_f64;
        let mut compat = 0.0_f64;
        let mut min_eig = f64::INFINITY;
        for p in 0..total {
            let jp: Vec<f64> = (0..d * d).map(|c| j.comp(c)[p]).collect();
            let om: Vec<f64> = (0..d * d).map(|c| geom.omega.comp(c)[p]).collect();
            for a in 0..d {
                sq = sq.max((jj.comp(a * d + a)[p] + 1.0).abs());
                for b in 0..d {
                    if a != b {
                        sq = sq.max(jj.comp(a * d + b)[p].abs());
                    }
                    let mut s = 0.0;
                    for e in 0..d {
                        for f in 0..d {
                            s += om[e * d + f] * jp[e * d + a] * jp[f * d + b];
                        }
                    }
                    compat = compat.max((s - om[a * d + b]).abs());
                }
            }
            let g = metric_of(&om, &jp, d);
            min_eig = min_eig.min(crate::kahler_geometry::min_eigenvalue(&g, d));
        }
        if sq > tol {
            return Err(KflowError::InvariantViolation { what: "J² = −Id".into(), residual: sq });
        }
        if compat > tol {
            return Err(KflowError::InvariantViolation { what: "ω(J·,J·) = ω".into(), residual: compat });
        }
        if !(min_eig > 0.0) {
            return Err(KflowError::PositivityViolation { point: 0, eigenvalue: min_eig });
        }
        let nijenhuis = nijenhuis_residual(&j)?;
        Ok(CompatibleACS { j, nijenhuis })
    }

    pub fn new(j: TensorField, geom: &GeometryCache) -> Result<Self> {
        Self::with_tolerance(j, geom, 1e-10)
    }

    pub fn is_integrable(&self) -> bool {
        self.nijenhuis < INTEGRABLE_TOL
    }
}

/// Symmetrized `g_ab = ω_{ac}J^c_b`.
pub(crate) fn metric_of(om: &[f64], jp: &[f64], d: usize) -> Vec<f64> {
    let mut g = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                g[a * d + b] += om[a * d + c] * jp[c * d + b];
            }
        }
    }
    for a in 0..d {
        for b in (a + 1)..d {
            let m = 0.5 * (g[a * d + b] + g[b * d + a]);
            g[a * d + b] = m;
            g[b * d + a] = m;
        }
    }
    g
}

/// `sup |N_J|`, `N^a_{bc} = J^e_b∂_eJ^a_c − J^e_c∂_eJ^a_b − J^a_e(∂_bJ^e_c − ∂_cJ^e_b)`.
pub fn nijenhuis_residual(j: &TensorField) -> Result<f64> {
    let d = j.spec.dim();
    let total = j.spec.total();
    let dj: Vec<TensorField> = (0..d).map(|e| partial_derivative_tensor(j, e, 1)).collect::<Result<_>>()?;
    let mut worst = 0.0_f64;
    for p in 0..total {
        for a in 0..d {
            for b in 0..d {
                for c in (b + 1)..d {
                    let mut s = 0.0;
                    for e in 0..d {
                        s += j.comp(e * d + b)[p] * dj[e].comp(a * d + c)[p]
                            - j.comp(e * d + c)[p] * dj[e].comp(a * d + b)[p];
                        s -= j.comp(a * d + e)[p] * (dj[b].comp(e * d + c)[p] - dj[c].comp(e * d + b)[p]);
                    }
                    worst = worst.max(s.abs());
                }
            }
        }
    }
    Ok(worst)
}

/// A tangent vector `A` to the space of compatible structures at `J`.
#[derive(Clone, Debug)]
pub struct ACSVariation {
    pub a: TensorField,
}

impl ACSVariation {
    /// Checks `AJ + JA = 0` and `ω(AX,Y) + ω(X,AY) = 0`, relative to `max(‖A‖∞, 1)`.
    pub fn new(a: TensorField, j: &CompatibleACS, geom: &GeometryCache, tol: f64) -> Result<Self> {
        if a.spec != geom.spec || a.rank() != 2 {
            return Err(KflowError::GridMismatch);
        }
        let (anti, symp) = variation_residuals(&a, j, geom);
        let scale = a.sup_norm().max(1.0);
        if anti > tol * scale {
            return Err(KflowError::InvariantViolation { what: "AJ + JA = 0".into(), residual: anti / scale });
        }
        if symp > tol * scale {
            return Err(KflowError::InvariantViolation { what: "A ∈ sp(ω)".into(), residual: symp / scale });
        }
        Ok(ACSVariation { a })
    }

    pub fn zeros(geom: &GeometryCache) -> Self {
        ACSVariation { a: endo_zeros(geom) }
    }

    pub fn scale(&self, c: f64) -> Self {
        ACSVariation { a: self.a.scale(c) }
    }

    pub fn sup_norm(&self) -> f64 {
        self.a.sup_norm()
    }
}

/// `(sup|AJ + JA|, sup|ω(A·,·) + ω(·,A·)|)`.
pub(crate) fn variation_residuals(a: &TensorField, j: &CompatibleACS, geom: &GeometryCache) -> (f64, f64) {
    let d = geom.dim();
    let total = geom.spec.total();
    let s1 = endo_mul(a, &j.j).add(&endo_mul(&j.j, a)).sup_norm();
    let mut s2 = 0.0_f64;
    for p in 0..total {
        for b in 0..d {
            for c in b..d {
                let mut s = 0.0;
                for e in 0..d {
                    s += geom.omega.comp(e * d + c)[p] * a.comp(e * d + b)[p]
                        + geom.omega.comp(b * d + e)[p] * a.comp(e * d + c)[p];
                }
                s2 = s2.max(s.abs());
            }
        }
    }
    (s1, s2)
}

/// `L_{X_F}J` with `X_F` the `ω`-Hamiltonian field of `F`:
/// `(L_XJ)^a_b = X^c∂_cJ^a_b − J^c_b∂_cX^a + J^a_c∂_bX^c`.
pub fn lie_derivative_j(f: &ScalarField, j: &CompatibleACS, geom: &GeometryCache) -> Result<ACSVariation> {
    if f.spec != geom.spec {
        return Err(KflowError::GridMismatch);
    }
    let d = geom.dim();
    let total = geom.spec.total();
    let x = differential_ops(geom).hamiltonian_field(f)?;
    let xt =
        TensorField::from_components(geom.spec, vec![Variance::Contra], x.iter().map(|s| s.values.clone()).collect())?;
    let dx: Vec<TensorField> = (0..d).map(|c| partial_derivative_tensor(&xt, c, 1)).collect::<Result<_>>()?;
    let dj: Vec<TensorField> = (0..d).map(|c| partial_derivative_tensor(&j.j, c, 1)).collect::<Result<_>>()?;
    let mut out = endo_zeros(geom);
    for a in 0..d {
        for b in 0..d {
            let mut acc = vec![0.0; total];
            for c in 0..d {
                let (jab, jcb, jac) = (dj[c].comp(a * d + b), j.j.comp(c * d + b), j.j.comp(a * d + c));
                let (dca, dbc) = (dx[c].comp(a), dx[b].comp(c));
                for p in 0..total {
                    acc[p] += x[c].values[p] * jab[p] - jcb[p] * dca[p] + jac[p] * dbc[p];
                }
            }
            out.comp_mut(a * d + b).copy_from_slice(&acc);
        }
    }
    ACSVariation::new(out, j, geom, 1e-8)
}

/// `I_J(A) = JA`.
pub fn i_apply(a: &ACSVariation, j: &CompatibleACS) -> ACSVariation {
    ACSVariation { a: endo_mul(&j.j, &a.a) }
}

/// `G^𝓙(A,B) = ∫ tr(AB) ω^n/n!`.
pub fn g_j(a: &ACSVariation, b: &ACSVariation, geom: &GeometryCache) -> Result<f64> {
    if a.a.spec != geom.spec || b.a.spec != geom.spec {
        return Err(KflowError::GridMismatch);
    }
    Ok(weighted_mean(&endo_trace(&endo_mul(&a.a, &b.a)), &geom.volume.values))
}

/// `Ω^𝓙(A,B) = ∫ tr(JAB) ω^n/n! = G^𝓙(JA, B)`.
pub fn omega_j(a: &ACSVariation, b: &ACSVariation, j: &CompatibleACS, geom: &GeometryCache) -> Result<f64> {
    g_j(&i_apply(a, j), b, geom)
}
