use super::cache::GeometryCache;
use crate::error::{KflowError, Result};
use crate::grid_core::{gradient, MultiIndex, ScalarField, Spectrum, Symmetry, TensorField, Variance};

/// Scalar differential operators of `(ω_φ, g_φ)`.
///
/// Sign conventions: `Δ = −g^{ab}∇_a∇_b` (positive spectrum),
/// `d^cF = −dF∘J`, `i(X_F)ω = dF`, `{F,H} = Λ^{ab}∂_aF∂_bH = −ω(X_F,X_H)`.
pub struct DifferentialOps<'a> {
    pub geom: &'a GeometryCache,
}

pub fn differential_ops(geom: &GeometryCache) -> DifferentialOps<'_> {
    DifferentialOps { geom }
}

/// First and second partial derivatives of `f`: `(∂_a f, ∂_a∂_b f)` with the
/// second derivatives stored row-major.
pub(crate) fn first_second(f: &ScalarField) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let d = f.spec.dim();
    let s = Spectrum::forward(&f.spec, &f.values);
    let first: Vec<Vec<f64>> = (0..d)
        .map(|a| {
            let mut al: MultiIndex = vec![0; d];
            al[a] = 1;
            s.derivative(&al)
        })
        .collect();
    let mut second = vec![Vec::new(); d * d];
    for a in 0..d {
        for b in a..d {
            let mut al: MultiIndex = vec![0; d];
            al[a] += 1;
            al[b] += 1;
            let v = s.derivative(&al);
            second[b * d + a] = v.clone();
            second[a * d + b] = v;
        }
    }
    (first, second)
}

impl DifferentialOps<'_> {
    fn check(&self, f: &ScalarField) -> Result<()> {
        if f.spec != self.geom.spec {
            Err(KflowError::GridMismatch)
        } else {
            Ok(())
        }
    }

    /// `ΔF = −g^{ab}(∂_a∂_bF − Γ^c_{ab}∂_cF)`.
    pub fn laplacian(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        let g = self.geom;
        let d = g.dim();
        let (first, second) = first_second(f);
        let mut out = vec![0.0; g.spec.total()];
        for a in 0..d {
            for b in 0..d {
                let gi = g.metric_inv.at(&[a, b]);
                let sab = &second[a * d + b];
                let mut hess: Vec<f64> = sab.clone();
                for c in 0..d {
                    let gam = g.christoffel.at(&[c, a, b]);
                    for p in 0..hess.len() {
                        hess[p] -= gam[p] * first[c][p];
                    }
                }
                for p in 0..out.len() {
                    out[p] -= gi[p] * hess[p];
                }
            }
        }
        Ok(ScalarField { spec: g.spec, values: out })
    }

    /// `d^cF = −dF∘J` as a 1-form.
    pub fn dc(&self, f: &ScalarField) -> Result<Vec<ScalarField>> {
        self.check(f)?;
        let fr = &self.geom.frame;
        let grad = gradient(f);
        Ok((0..fr.dim).map(|b| grad[fr.perm[b]].scale(-fr.sign[b])).collect())
    }

    /// `dd^cF` as an antisymmetric covariant 2-tensor, by two spectral
    /// exterior derivatives.
    pub fn ddc(&self, f: &ScalarField) -> Result<TensorField> {
        let alpha = self.dc(f)?;
        Ok(exterior_derivative(&alpha))
    }

    /// `X_F^a = Λ^{ba}∂_bF`, so that `i(X_F)ω_φ = dF`.
    pub fn hamiltonian_field(&self, f: &ScalarField) -> Result<Vec<ScalarField>> {
        self.check(f)?;
        let g = self.geom;
        let d = g.dim();
        let grad = gradient(f);
        Ok((0..d)
            .map(|a| {
                let mut v = vec![0.0; g.spec.total()];
                for b in 0..d {
                    let l = g.lambda.at(&[b, a]);
                    for p in 0..v.len() {
                        v[p] += l[p] * grad[b].values[p];
                    }
                }
                ScalarField { spec: g.spec, values: v }
            })
            .collect())
    }

    /// `{F,H} = Λ^{ab}∂_aF∂_bH`.
    pub fn poisson(&self, f: &ScalarField, h: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        self.check(h)?;
        let g = self.geom;
        let d = g.dim();
        let gf = gradient(f);
        let gh = gradient(h);
        let mut v = vec![0.0; g.spec.total()];
        for a in 0..d {
            for b in 0..d {
                let l = g.lambda.at(&[a, b]);
                for p in 0..v.len() {
                    v[p] += l[p] * gf[a].values[p] * gh[b].values[p];
                }
            }
        }
        Ok(ScalarField { spec: g.spec, values: v })
    }

    /// `grad F = g^{ab}∂_bF`.
    pub fn gradient_field(&self, f: &ScalarField) -> Result<Vec<ScalarField>> {
        self.check(f)?;
        let g = self.geom;
        let d = g.dim();
        let grad = gradient(f);
        Ok((0..d)
            .map(|a| {
                let mut v = vec![0.0; g.spec.total()];
                for b in 0..d {
                    let gi = g.metric_inv.at(&[a, b]);
                    for p in 0..v.len() {
                        v[p] += gi[p] * grad[b].values[p];
                    }
                }
                ScalarField { spec: g.spec, values: v }
            })
            .collect())
    }
}

/// `(dα)_{ab} = ∂_aα_b − ∂_bα_a` for a 1-form given by its components.
pub fn exterior_derivative(alpha: &[ScalarField]) -> TensorField {
    let spec = alpha[0].spec;
    let d = spec.dim();
    let grads: Vec<Vec<ScalarField>> = alpha.iter().map(gradient).collect();
    let mut out = TensorField::zeros(spec, vec![Variance::Co, Variance::Co])
        .with_symmetries(vec![Symmetry::antisymmetric(0, 1, 2)]);
    for a in 0..d {
        for b in 0..d {
            if a == b {
                continue;
            }
            let v: Vec<f64> = grads[b][a].values.iter().zip(&grads[a][b].values).map(|(x, y)| x - y).collect();
            out.comp_mut(a * d + b).copy_from_slice(&v);
        }
    }
    out
}

/// Sup-norm of `dχ` for a 2-form, the cyclic sum `∂_aχ_bc + ∂_bχ_ca + ∂_cχ_ab`.
pub fn closedness_residual(chi: &TensorField) -> f64 {
    let d = chi.spec.dim();
    let grads: Vec<Vec<ScalarField>> =
        (0..d * d).map(|c| gradient(&ScalarField { spec: chi.spec, values: chi.comp(c).to_vec() })).collect();
    let mut worst = 0.0_f64;
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                let x = &grads[b * d + c][a].values;
                let y = &grads[c * d + a][b].values;
                let z = &grads[a * d + b][c].values;
                for p in 0..x.len() {
                    worst = worst.max((x[p] + y[p] + z[p]).abs());
                }
            }
        }
    }
    worst
}
