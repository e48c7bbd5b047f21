use super::contract::{check, gradient_hessian, is_constant, lambda_lambda};
use super::series::NuSeries;
use crate::connection_space::{lie_derivative_connection, triple_lambda_density};
use crate::error::Result;
use crate::grid_core::ScalarField;
use crate::kahler_geometry::{differential_ops, GeometryCache};

/// Truncation order of the Fedosov product.
pub const FEDOSOV_ORDER: usize = 3;

/// Coefficient of `ΛΛ(∇²F)(∇²H)` at order `ν²`. The Moyal value `1/8` is the
/// one compatible with associativity at `ν²` given the `ν/2` bracket term.
pub const FEDOSOV_NU2_COEFF: f64 = 0.125;

/// `S³_∇(F,H) = Λ^{i₁j₁}Λ^{i₂j₂}Λ^{i₃j₃}(L_{X_F}∇)_{i₁i₂i₃}(L_{X_H}∇)_{j₁j₂j₃}`
/// with the Lie derivatives lowered by `ω`.
pub fn s3_pairing(f: &ScalarField, h: &ScalarField, geom: &GeometryCache) -> Result<ScalarField> {
    check(f, geom)?;
    check(h, geom)?;
    if is_constant(f) || is_constant(h) {
        return Ok(ScalarField::zeros(geom.spec));
    }
    let lf = lie_derivative_connection(f, geom)?;
    let lh = lie_derivative_connection(h, geom)?;
    Ok(ScalarField { spec: geom.spec, values: triple_lambda_density(&lf, &lh, geom) })
}

/// Both orderings `(F*H, H*F)` with shared intermediate quantities.
pub(crate) fn fedosov_pair(
    f: &ScalarField,
    h: &ScalarField,
    geom: &GeometryCache,
    nu2: f64,
) -> Result<(NuSeries, NuSeries)> {
    check(f, geom)?;
    check(h, geom)?;
    let spec = geom.spec;
    let fh = f.mul(h);
    if is_constant(f) || is_constant(h) {
        let s =
            NuSeries::from_real(&[fh, ScalarField::zeros(spec), ScalarField::zeros(spec), ScalarField::zeros(spec)])?;
        return Ok((s.clone(), s));
    }
    let ops = differential_ops(geom);
    let (_, hf) = gradient_hessian(f, geom);
    let (_, hh) = gradient_hessian(h, geom);
    let c2fh = ScalarField { spec, values: lambda_lambda(&hf, &hh, geom) }.scale(nu2);
    let c2hf = ScalarField { spec, values: lambda_lambda(&hh, &hf, geom) }.scale(nu2);
    let lf = lie_derivative_connection(f, geom)?;
    let lh = lie_derivative_connection(h, geom)?;
    let s3fh = ScalarField { spec, values: triple_lambda_density(&lf, &lh, geom) }.scale(1.0 / 48.0);
    let s3hf = ScalarField { spec, values: triple_lambda_density(&lh, &lf, geom) }.scale(1.0 / 48.0);
    let a = NuSeries::from_real(&[fh.clone(), ops.poisson(f, h)?.scale(0.5), c2fh, s3fh])?;
    let b = NuSeries::from_real(&[fh, ops.poisson(h, f)?.scale(0.5), c2hf, s3hf])?;
    Ok((a, b))
}

/// `F*H = FH + (ν/2){F,H} + ν²c₂ΛΛ(∇²F)(∇²H) + (ν³/48)S³_∇(F,H)`, with
/// `c₂ =` [`FEDOSOV_NU2_COEFF`].
pub fn fedosov_product(f: &ScalarField, h: &ScalarField, geom: &GeometryCache) -> Result<NuSeries> {
    Ok(fedosov_pair(f, h, geom, FEDOSOV_NU2_COEFF)?.0)
}

/// Same as [`fedosov_product`] with an explicit `ν²` coefficient.
pub fn fedosov_product_with(f: &ScalarField, h: &ScalarField, geom: &GeometryCache, nu2: f64) -> Result<NuSeries> {
    Ok(fedosov_pair(f, h, geom, nu2)?.0)
}

/// `F*H − H*F`, computed from both orderings.
pub fn fedosov_commutator(f: &ScalarField, h: &ScalarField, geom: &GeometryCache) -> Result<NuSeries> {
    let (a, b) = fedosov_pair(f, h, geom, FEDOSOV_NU2_COEFF)?;
    a.sub(&b)
}

/// Bilinear extension to series: `Σ ν^{i+j+r} C_r(a_i, b_j)`, truncated at
/// the smaller order (coefficients must be real).
pub fn fedosov_product_series(a: &NuSeries, b: &NuSeries, geom: &GeometryCache, nu2: f64) -> Result<NuSeries> {
    let k = a.order().min(b.order()).min(FEDOSOV_ORDER);
    let ar = a.real_parts();
    let br = b.real_parts();
    let mut out = vec![ScalarField::zeros(geom.spec); k + 1];
    for i in 0..=k {
        for j in 0..=(k - i) {
            let prod = fedosov_pair(&ar[i], &br[j], geom, nu2)?.0.real_parts();
            for (r, c) in prod.iter().enumerate() {
                if i + j + r <= k {
                    out[i + j + r] = out[i + j + r].add(c);
                }
            }
        }
    }
    NuSeries::from_real(&out)
}

/// Trace density `1 + (ν²/24)μ` for a given normalized moment map `μ`.
pub fn fedosov_trace_density(mu: &ScalarField) -> Result<NuSeries> {
    let spec = mu.spec;
    NuSeries::from_real(&[
        ScalarField::constant(spec, 1.0),
        ScalarField::zeros(spec),
        mu.scale(1.0 / 24.0),
        ScalarField::zeros(spec),
    ])
}
