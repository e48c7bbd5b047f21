use super::diffeo::{inverse_matrix, DiscreteDiffeo};
use crate::error::{KflowError, Result};
use crate::grid_core::{partial_derivative_tensor, ScalarField, TensorField, TrigInterpolant, Variance};
use crate::kahler_geometry::kernels::pointwise;

/// Values of all components of `t` at the image points `f(x_p)`.
fn sample_at_images(comps: &[&[f64]], f: &DiscreteDiffeo) -> Vec<Vec<f64>> {
    if let Some(shift) = &f.shift {
        return comps
            .iter()
            .map(|c| (0..f.spec.total()).map(|i| c[f.spec.shifted_index(i, shift)]).collect())
            .collect();
    }
    let it = TrigInterpolant::new(&f.spec, comps, 0.0);
    pointwise(f.spec.total(), comps.len(), |p, out| it.eval(&f.image(p), out))
}

/// `f^*F = F∘f`.
pub fn pullback_scalar(s: &ScalarField, f: &DiscreteDiffeo) -> Result<ScalarField> {
    s.check_grid(&f.spec)?;
    let v = sample_at_images(&[&s.values], f).remove(0);
    Ok(ScalarField { spec: s.spec, values: v })
}

/// `(f^*T)_{i₁…i_r}(x) = T_{j₁…j_r}(f(x)) ∂_{i₁}f^{j₁}⋯∂_{i_r}f^{j_r}` for a covariant tensor.
pub fn pullback_covariant(t: &TensorField, f: &DiscreteDiffeo) -> Result<TensorField> {
    if t.spec != f.spec {
        return Err(KflowError::GridMismatch);
    }
    if t.variance.iter().any(|v| *v != Variance::Co) {
        return Err(KflowError::NotApplicable("pullback_covariant needs an all-covariant tensor".into()));
    }
    let d = f.dim();
    let r = t.rank();
    let nc = t.ncomp();
    let comps: Vec<&[f64]> = (0..nc).map(|c| t.comp(c)).collect();
    let at_img = sample_at_images(&comps, f);
    let mut out = TensorField::zeros(t.spec, t.variance.clone());
    out.symmetries = t.symmetries.clone();
    let res = pointwise(t.spec.total(), nc, |p, o| {
        let jac = f.jacobian(p);
        let mut cur: Vec<f64> = (0..nc).map(|c| at_img[c][p]).collect();
        // contract one slot at a time
        for slot in 0..r {
            let inner = d.pow((r - 1 - slot) as u32);
            let mut next = vec![0.0; nc];
            for c in 0..nc {
                let i = (c / inner) % d;
                let base = c - i * inner;
                let mut s = 0.0;
                for j in 0..d {
                    s += cur[base + j * inner] * jac[j * d + i];
                }
                next[c] = s;
            }
            cur = next;
        }
        o.copy_from_slice(&cur);
    });
    for (c, v) in res.into_iter().enumerate() {
        out.comp_mut(c).copy_from_slice(&v);
    }
    Ok(out)
}

/// `(f^*E)(x) = Df(x)⁻¹ E(f(x)) Df(x)` for an endomorphism field `E^a_b`
/// (component `a·d + b`). With `E = J` this is `f⁻¹.J`.
pub fn pullback_endomorphism(e: &TensorField, f: &DiscreteDiffeo) -> Result<TensorField> {
    if e.spec != f.spec {
        return Err(KflowError::GridMismatch);
    }
    let d = f.dim();
    let comps: Vec<&[f64]> = (0..d * d).map(|c| e.comp(c)).collect();
    let at_img = sample_at_images(&comps, f);
    let res = pointwise(e.spec.total(), d * d, |p, o| {
        let jac = f.jacobian(p);
        let ji = inverse_matrix(&jac, d);
        for a in 0..d {
            for b in 0..d {
                let mut s = 0.0;
                for c in 0..d {
                    for k in 0..d {
                        s += ji[a * d + c] * at_img[c * d + k][p] * jac[k * d + b];
                    }
                }
                o[a * d + b] = s;
            }
        }
    });
    TensorField::from_components(e.spec, e.variance.clone(), res)
}

/// Pullback connection `f⁻¹.∇`:
/// `Γ̃^a_{bc} = (Df⁻¹)^a_d (Γ^d_{ef}(f(x)) ∂_bf^e ∂_cf^f + ∂_b∂_cf^d)`.
pub fn pullback_connection(gamma: &TensorField, f: &DiscreteDiffeo) -> Result<TensorField> {
    if gamma.spec != f.spec || gamma.rank() != 3 {
        return Err(KflowError::GridMismatch);
    }
    let d = f.dim();
    let spec = f.spec;
    let comps: Vec<&[f64]> = (0..d * d * d).map(|c| gamma.comp(c)).collect();
    let at_img = sample_at_images(&comps, f);
    let jt = TensorField::from_components(spec, vec![Variance::Contra, Variance::Co], f.jac_dev.clone())?;
    let djac: Vec<TensorField> = (0..d).map(|b| partial_derivative_tensor(&jt, b, 1)).collect::<Result<_>>()?;
    let res = pointwise(spec.total(), d * d * d, |p, o| {
        let jac = f.jacobian(p);
        let ji = inverse_matrix(&jac, d);
        let mut inner = vec![0.0; d * d * d]; // [dd][b][c]
        for dd in 0..d {
            for b in 0..d {
                for c in 0..d {
                    let mut s = djac[b].comp(dd * d + c)[p];
                    for e in 0..d {
                        for g in 0..d {
                            s += at_img[(dd * d + e) * d + g][p] * jac[e * d + b] * jac[g * d + c];
                        }
                    }
                    inner[(dd * d + b) * d + c] = s;
                }
            }
        }
        for a in 0..d {
            for bc in 0..d * d {
                let mut s = 0.0;
                for dd in 0..d {
                    s += ji[a * d + dd] * inner[dd * d * d + bc];
                }
                o[a * d * d + bc] = s;
            }
        }
    });
    let mut out = TensorField::from_components(spec, gamma.variance.clone(), res)?;
    out.symmetries = gamma.symmetries.clone();
    Ok(out)
}
