use crate::error::{KflowError, Result};
use crate::grid_core::ScalarField;
use crate::kahler_geometry::{first_second, GeometryCache};

/// True when every sample equals the first (all derivatives vanish exactly).
pub(crate) fn is_constant(f: &ScalarField) -> bool {
    f.values.iter().all(|&v| v == f.values[0])
}

pub(crate) fn check(f: &ScalarField, geom: &GeometryCache) -> Result<()> {
    if f.spec != geom.spec {
        Err(KflowError::GridMismatch)
    } else {
        Ok(())
    }
}

/// First partials and covariant Hessian `(∇²F)_{ab} = ∂_a∂_bF − Γ^c_{ab}∂_cF`.
pub(crate) fn gradient_hessian(f: &ScalarField, geom: &GeometryCache) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let d = geom.dim();
    let total = geom.spec.total();
    let (first, mut second) = first_second(f);
    for a in 0..d {
        for b in 0..d {
            let h = &mut second[a * d + b];
            for c in 0..d {
                let gam = geom.christoffel.at(&[c, a, b]);
                let fc = &first[c];
                for p in 0..total {
                    h[p] -= gam[p] * fc[p];
                }
            }
        }
    }
    (first, second)
}

/// `Λ^{i₁j₁}Λ^{i₂j₂}A_{i₁i₂}B_{j₁j₂}` at every point.
pub(crate) fn lambda_lambda(a: &[Vec<f64>], b: &[Vec<f64>], geom: &GeometryCache) -> Vec<f64> {
    let d = geom.dim();
    let total = geom.spec.total();
    let mut out = vec![0.0; total];
    for i1 in 0..d {
        for j1 in 0..d {
            let l1 = geom.lambda.at(&[i1, j1]);
            for i2 in 0..d {
                for j2 in 0..d {
                    let l2 = geom.lambda.at(&[i2, j2]);
                    let (x, y) = (&a[i1 * d + i2], &b[j1 * d + j2]);
                    for p in 0..total {
                        out[p] += l1[p] * l2[p] * x[p] * y[p];
                    }
                }
            }
        }
    }
    out
}

/// `Λ^{ij}χ_{ij}` for a covariant 2-tensor given by its components.
pub(crate) fn lambda_trace(chi: &crate::grid_core::TensorField, geom: &GeometryCache) -> ScalarField {
    let d = geom.dim();
    let total = geom.spec.total();
    let mut out = vec![0.0; total];
    for i in 0..d {
        for j in 0..d {
            let (l, c) = (geom.lambda.at(&[i, j]), chi.at(&[i, j]));
            for p in 0..total {
                out[p] += l[p] * c[p];
            }
        }
    }
    ScalarField { spec: geom.spec, values: out }
}
