use super::contract::{check, gradient_hessian, is_constant, lambda_lambda, lambda_trace};
use super::series::NuSeries;
use super::trace::{trace_defect, StarProduct, TraceDefect};
use crate::error::{KflowError, Result};
use crate::flows::{pullback_covariant, DiscreteDiffeo};
use crate::grid_core::{ScalarField, Symmetry, TensorField, Variance};
use crate::kahler_geometry::kernels::{invert, pointwise};
use crate::kahler_geometry::{closedness_residual, differential_ops, exterior_derivative, GeometryCache};
use crate::numerics::{richardson_derivative, richardson_derivative_vec, weighted_mean};

/// Closedness tolerance for [`ClosedTwoForm`].
pub const CLOSED_TOL: f64 = 1e-9;

/// Default `ν²` coefficient `k′` of `ΛΛ(∇²F)(∇²H)` in the `νχ` product,
/// matching the vanishing-curvature product.
pub const DEFAULT_K_PRIME: f64 = super::fedosov::FEDOSOV_NU2_COEFF;

/// Coefficient `κ` of the density `1 + νκΛ^{ij}χ_{ij}` that closes the
/// `νχ` product at order `ν²`, measured (see [`chi_trace_density_with`]).
pub const CHI_CLOSING_COEFF: f64 = -0.5;

/// Closed 2-form `χ_{ab}` (antisymmetric covariant 2-tensor with `dχ = 0`).
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedTwoForm {
    pub chi: TensorField,
}

impl ClosedTwoForm {
    /// Validates antisymmetry and `|dχ| < CLOSED_TOL`.
    pub fn new(mut chi: TensorField) -> Result<Self> {
        if chi.rank() != 2 || chi.variance.iter().any(|v| *v != Variance::Co) {
            return Err(KflowError::NotApplicable("a 2-form is a covariant rank-2 tensor".into()));
        }
        chi.symmetries = vec![Symmetry::antisymmetric(0, 1, 2)];
        let s = chi.symmetry_residual();
        if s > CLOSED_TOL {
            return Err(KflowError::SymmetryViolation { what: "2-form".into(), residual: s });
        }
        let r = closedness_residual(&chi);
        if r > CLOSED_TOL {
            return Err(KflowError::InvariantViolation { what: "closedness of χ".into(), residual: r });
        }
        Ok(ClosedTwoForm { chi })
    }

    /// `χ = dα`.
    pub fn exact(alpha: &[ScalarField]) -> Result<Self> {
        Self::new(exterior_derivative(alpha))
    }

    /// `χ = c·ω_φ`.
    pub fn multiple_of_omega(geom: &GeometryCache, c: f64) -> Result<Self> {
        Self::new(geom.omega.scale(c))
    }

    /// `Λ^{ij}χ_{ij}`.
    pub fn lambda_trace(&self, geom: &GeometryCache) -> ScalarField {
        lambda_trace(&self.chi, geom)
    }

    /// `χ(U,V) = χ_{ab}U^aV^b`.
    pub fn eval(&self, u: &[ScalarField], v: &[ScalarField]) -> ScalarField {
        let d = self.chi.spec.dim();
        let total = self.chi.spec.total();
        let mut out = vec![0.0; total];
        for a in 0..d {
            for b in 0..d {
                let c = self.chi.at(&[a, b]);
                for p in 0..total {
                    out[p] += c[p] * u[a].values[p] * v[b].values[p];
                }
            }
        }
        ScalarField { spec: self.chi.spec, values: out }
    }
}

pub(crate) fn chi_pair(
    f: &ScalarField,
    h: &ScalarField,
    chi: &ClosedTwoForm,
    geom: &GeometryCache,
    k_prime: f64,
) -> Result<(NuSeries, NuSeries)> {
    check(f, geom)?;
    check(h, geom)?;
    if chi.chi.spec != geom.spec {
        return Err(KflowError::GridMismatch);
    }
    let spec = geom.spec;
    let fh = f.mul(h);
    if is_constant(f) || is_constant(h) {
        let s = NuSeries::from_real(&[fh, ScalarField::zeros(spec), ScalarField::zeros(spec)])?;
        return Ok((s.clone(), s));
    }
    let ops = differential_ops(geom);
    let xf = ops.hamiltonian_field(f)?;
    let xh = ops.hamiltonian_field(h)?;
    let (_, hf) = gradient_hessian(f, geom);
    let (_, hh) = gradient_hessian(h, geom);
    let c2fh =
        chi.eval(&xf, &xh).scale(0.5).add(&ScalarField { spec, values: lambda_lambda(&hf, &hh, geom) }.scale(k_prime));
    let c2hf =
        chi.eval(&xh, &xf).scale(0.5).add(&ScalarField { spec, values: lambda_lambda(&hh, &hf, geom) }.scale(k_prime));
    Ok((
        NuSeries::from_real(&[fh.clone(), ops.poisson(f, h)?.scale(0.5), c2fh])?,
        NuSeries::from_real(&[fh, ops.poisson(h, f)?.scale(0.5), c2hf])?,
    ))
}

/// `F*H = FH + (ν/2){F,H} + ν²(½χ(X_F,X_H) + k′ΛΛ(∇²F)(∇²H))`.
pub fn chi_product(
    f: &ScalarField,
    h: &ScalarField,
    chi: &ClosedTwoForm,
    geom: &GeometryCache,
    k_prime: f64,
) -> Result<NuSeries> {
    Ok(chi_pair(f, h, chi, geom, k_prime)?.0)
}

/// Trace density `1 + νΛ^{ij}χ_{ij}`, truncated at `ν²` with zero `ν²` term.
pub fn chi_trace_density(chi: &ClosedTwoForm, geom: &GeometryCache) -> Result<NuSeries> {
    chi_trace_density_with(chi, geom, 1.0)
}

/// Trace density `1 + νκΛ^{ij}χ_{ij}`.
pub fn chi_trace_density_with(chi: &ClosedTwoForm, geom: &GeometryCache, kappa: f64) -> Result<NuSeries> {
    let spec = geom.spec;
    NuSeries::from_real(&[
        ScalarField::constant(spec, 1.0),
        chi.lambda_trace(geom).scale(kappa),
        ScalarField::zeros(spec),
    ])
}

/// Coefficients of `∫[F,H]_{∇,νχ}(1 + νΛ^{ij}χ_{ij}) ω^n/n!` through `ν²`.
pub fn chi_commutator_defect(
    f: &ScalarField,
    h: &ScalarField,
    chi: &ClosedTwoForm,
    geom: &GeometryCache,
) -> Result<TraceDefect> {
    chi_commutator_defect_with(f, h, chi, geom, 1.0)
}

/// Same as [`chi_commutator_defect`] with density `1 + νκΛ^{ij}χ_{ij}`.
pub fn chi_commutator_defect_with(
    f: &ScalarField,
    h: &ScalarField,
    chi: &ClosedTwoForm,
    geom: &GeometryCache,
    kappa: f64,
) -> Result<TraceDefect> {
    let rho = chi_trace_density_with(chi, geom, kappa)?;
    trace_defect(f, h, &rho, StarProduct::Chi { chi, k_prime: DEFAULT_K_PRIME }, geom)
}

/// `μ(f)` defined by `μ(f) ω^n/n! = −(f^*χ) ∧ ω^{n−1}/(n−1)!`, evaluated as
/// `−n·Λ^{ij}(f^*χ)_{ij} / Λ^{ij}ω_{ij}`.
pub fn donaldson_moment(f: &DiscreteDiffeo, chi: &ClosedTwoForm, geom: &GeometryCache) -> Result<ScalarField> {
    if f.spec != geom.spec || chi.chi.spec != geom.spec {
        return Err(KflowError::GridMismatch);
    }
    let pulled = pullback_covariant(&chi.chi, f)?;
    let num = lambda_trace(&pulled, geom);
    let den = lambda_trace(&geom.omega, geom);
    let n = geom.spec.n as f64;
    Ok(num.zip(&den, |a, b| -n * a / b))
}

/// `Ω^𝓜_f(U,V) = ∫χ_{f(x)}(U_x,V_x) ω^n/n!`, evaluated as
/// `∫(f^*χ)(Df⁻¹U, Df⁻¹V)` for `U,V` sections of `f^*TM`.
pub fn omega_diff(
    f: &DiscreteDiffeo,
    chi: &ClosedTwoForm,
    u: &[Vec<f64>],
    v: &[Vec<f64>],
    geom: &GeometryCache,
) -> Result<f64> {
    let d = geom.dim();
    let pulled = pullback_covariant(&chi.chi, f)?;
    let dens = pointwise(geom.spec.total(), 1, |p, out| {
        let jinv = invert(&f.jacobian(p), d);
        let pull =
            |w: &[Vec<f64>]| -> Vec<f64> { (0..d).map(|a| (0..d).map(|b| jinv[a * d + b] * w[b][p]).sum()).collect() };
        let (uu, vv) = (pull(u), pull(v));
        let mut s = 0.0;
        for a in 0..d {
            for b in 0..d {
                s += pulled.at(&[a, b])[p] * uu[a] * vv[b];
            }
        }
        out[0] = s;
    })
    .remove(0);
    Ok(weighted_mean(&dens, &geom.volume.values))
}

/// Both sides of the moment property along a path `t ↦ f_t`:
/// `(d/dt ∫Fμ(f_t) ω^n/n!, Ω^𝓜_{f_t}(f_*X_F, ḟ_t))` at `t0`, with
/// Richardson differences of step `h`.
pub fn donaldson_moment_sides<P>(
    path: P,
    t0: f64,
    f: &ScalarField,
    chi: &ClosedTwoForm,
    geom: &GeometryCache,
    h: f64,
) -> Result<(f64, f64)>
where
    P: Fn(f64) -> Result<DiscreteDiffeo>,
{
    check(f, geom)?;
    let mut err = None;
    let lhs = richardson_derivative(
        |s| match path(t0 + s).and_then(|g| donaldson_moment(&g, chi, geom)) {
            Ok(mu) => geom.inner(f, &mu).unwrap_or(f64::NAN),
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        h,
    );
    let d = geom.dim();
    let vel = richardson_derivative_vec(
        |s| match path(t0 + s) {
            Ok(g) => g.disp.concat(),
            Err(e) => {
                err = Some(e);
                vec![f64::NAN; d * geom.spec.total()]
            }
        },
        h,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let total = geom.spec.total();
    let v: Vec<Vec<f64>> = vel.chunks(total).map(|c| c.to_vec()).collect();
    let f0 = path(t0)?;
    let xf = differential_ops(geom).hamiltonian_field(f)?;
    // f_*X_F at x is Df_x X_F(x)
    let push: Vec<Vec<f64>> = (0..d)
        .map(|a| {
            (0..total)
                .map(|p| {
                    let jac = f0.jacobian(p);
                    (0..d).map(|b| jac[a * d + b] * xf[b].values[p]).sum()
                })
                .collect()
        })
        .collect();
    let rhs = omega_diff(&f0, chi, &push, &v, geom)?;
    Ok((lhs, rhs))
}
