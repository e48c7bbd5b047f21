use super::adjoint::MuPipeline;
use crate::connection_space::moment_map_lc;
use crate::error::{KflowError, Result};
use crate::grid_core::{ScalarField, Spectrum, TensorField};
use crate::kahler_geometry::kernels::raise_all;
use crate::kahler_geometry::{build_geometry, differential_ops, GeometryCache, KahlerPotential};
use crate::numerics::{richardson_derivative_vec, sup_norm, weighted_mean};

/// Relative step for differencing the pipeline: `h = H_REL / ‖Δ_flat ψ‖∞`.
pub const H_REL: f64 = 1e-3;

/// `𝓕(ω_φ) = ∫ (μ^φ)² ω_φ^n/n!`.
pub fn functional_f(phi: &KahlerPotential) -> Result<f64> {
    let p = MuPipeline::new(phi)?;
    let mu = p.mu();
    let sq: Vec<f64> = mu.iter().map(|v| v * v).collect();
    Ok(weighted_mean(&sq, &p.vol))
}

/// `Cal(ω_φ) = ∫ Scal² ω_φ^n/n!`.
pub fn calabi(phi: &KahlerPotential) -> Result<f64> {
    let g = build_geometry(phi)?;
    g.integrate(&g.scal.mul(&g.scal))
}

/// `μ^φ` by the discrete pipeline.
pub fn mu_of(phi: &KahlerPotential) -> Result<ScalarField> {
    let p = MuPipeline::new(phi)?;
    Ok(ScalarField { spec: phi.spec(), values: p.mu() })
}

pub(crate) fn flat_laplacian_sup(psi: &ScalarField) -> f64 {
    let d = psi.spec.dim();
    let s = Spectrum::forward(&psi.spec, &psi.values);
    let mut acc = vec![0.0; psi.spec.total()];
    for a in 0..d {
        let mut al = vec![0; d];
        al[a] = 2;
        for (x, v) in acc.iter_mut().zip(s.derivative(&al)) {
            *x += v;
        }
    }
    sup_norm(&acc)
}

/// `D^φψ = d/dt|₀ μ^{φ+tψ}` by Richardson-extrapolated central differences
/// through the full nonlinear pipeline.
pub fn d_apply(phi: &KahlerPotential, psi: &ScalarField) -> Result<ScalarField> {
    if psi.spec != phi.spec() {
        return Err(KflowError::GridMismatch);
    }
    let scale = flat_laplacian_sup(psi);
    if scale == 0.0 {
        return Ok(ScalarField::zeros(psi.spec));
    }
    let mut h = H_REL / scale;
    let mut last_err = None;
    for _ in 0..4 {
        let mut err = None;
        let v = richardson_derivative_vec(
            |t| match MuPipeline::new(&phi.perturbed(t, psi)) {
                Ok(p) => p.mu(),
                Err(e) => {
                    err = Some(e);
                    vec![f64::NAN; psi.spec.total()]
                }
            },
            h,
        );
        match err {
            None => return Ok(ScalarField { spec: psi.spec, values: v }),
            Some(e) => {
                last_err = Some(e);
                h *= 0.1;
            }
        }
    }
    Err(last_err.unwrap())
}

/// Exact tangent-linear `D^φψ` of the discrete pipeline (forward-mode).
pub fn d_apply_linearized(phi: &KahlerPotential, psi: &ScalarField) -> Result<ScalarField> {
    let p = MuPipeline::new(phi)?;
    Ok(ScalarField { spec: psi.spec, values: p.tangent(psi) })
}

/// `D*χ` with `⟨Dψ, χ⟩_{ω_φ} = ⟨ψ, D*χ⟩_{ω_φ}`, via the transpose of the
/// linearized pipeline: `D*χ = W⁻¹ Dᵀ (W χ)` with `W` the volume density.
pub fn d_star_apply(phi: &KahlerPotential, chi: &ScalarField) -> Result<ScalarField> {
    let p = MuPipeline::new(phi)?;
    Ok(d_star_with(&p, chi))
}

pub(crate) fn d_star_with(p: &MuPipeline, chi: &ScalarField) -> ScalarField {
    let w: Vec<f64> = chi.values.iter().zip(&p.vol).map(|(c, v)| c * v).collect();
    let t = p.transpose(&w);
    ScalarField { spec: chi.spec, values: t.iter().zip(&p.vol).map(|(x, v)| x / v).collect() }
}

/// `grad 𝓕 = 2D*μ − Δ(μ²)` with its `ω_φ`-weighted mean removed.
pub fn grad_f(phi: &KahlerPotential) -> Result<ScalarField> {
    let p = MuPipeline::new(phi)?;
    grad_with(phi, &p)
}

pub(crate) fn grad_with(phi: &KahlerPotential, p: &MuPipeline) -> Result<ScalarField> {
    let spec = phi.spec();
    let mu = ScalarField { spec, values: p.mu() };
    let dstar = d_star_with(p, &mu);
    let geom = build_geometry(phi)?;
    let lap = differential_ops(&geom).laplacian(&mu.mul(&mu))?;
    let g = dstar.scale(2.0).sub(&lap);
    let m = weighted_mean(&g.values, &p.vol);
    Ok(g.map(|v| v - m))
}

/// `d𝓕_φ(ψ) = ⟨grad 𝓕, ψ⟩_{ω_φ}`.
pub fn df_pairing(phi: &KahlerPotential, psi: &ScalarField) -> Result<f64> {
    let p = MuPipeline::new(phi)?;
    let g = grad_with(phi, &p)?;
    Ok(weighted_mean(&g.mul(psi).values, &p.vol))
}

/// Closed-form first variations along `φ + tψ`.
pub struct VariationFormulas {
    pub geom: GeometryCache,
    pub ddc_psi: TensorField,
    /// `d/dt Scal = −Δ²ψ − (dd^cψ)_{pq}ρ^{pq}`.
    pub d_scal: ScalarField,
}

impl VariationFormulas {
    /// `d/dt Δ^{φ+tψ}F = Σ_{p<q} (dd^cF)_{pq}(dd^cψ)^{pq}`.
    pub fn d_laplacian(&self, f: &ScalarField) -> Result<ScalarField> {
        let ddf = differential_ops(&self.geom).ddc(f)?;
        Ok(contract_raised(&ddf, &self.ddc_psi, &self.geom).scale(0.5))
    }
}

/// `S_{pq} T^{pq}` with `T` raised by `Λ`.
pub(crate) fn contract_raised(s: &TensorField, t: &TensorField, geom: &GeometryCache) -> ScalarField {
    let d = geom.dim();
    let total = geom.spec.total();
    let mut out = vec![0.0; total];
    for p in 0..total {
        let lam: Vec<f64> = (0..d * d).map(|c| geom.lambda.comp(c)[p]).collect();
        let tp: Vec<f64> = (0..d * d).map(|c| t.comp(c)[p]).collect();
        let up = raise_all(d, &tp, 2, &lam);
        out[p] = (0..d * d).map(|c| s.comp(c)[p] * up[c]).sum();
    }
    ScalarField { spec: geom.spec, values: out }
}

pub fn variation_formulas(phi: &KahlerPotential, psi: &ScalarField) -> Result<VariationFormulas> {
    let geom = build_geometry(phi)?;
    let ops = differential_ops(&geom);
    let ddc_psi = ops.ddc(psi)?;
    let lap2 = ops.laplacian(&ops.laplacian(psi)?)?;
    let rho_term = contract_raised(&ddc_psi, &geom.ricci_form, &geom);
    let d_scal = lap2.scale(-1.0).sub(&rho_term);
    Ok(VariationFormulas { geom, ddc_psi, d_scal })
}

/// Richardson difference of `Scal` along `φ + tψ` (cross-check of the closed form).
pub fn d_scal_fd(phi: &KahlerPotential, psi: &ScalarField, h: f64) -> Result<ScalarField> {
    let mut err = None;
    let v = richardson_derivative_vec(
        |t| match build_geometry(&phi.perturbed(t, psi)) {
            Ok(g) => g.scal.values,
            Err(e) => {
                err = Some(e);
                vec![f64::NAN; psi.spec.total()]
            }
        },
        h,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(ScalarField { spec: psi.spec, values: v }),
    }
}

/// Richardson difference of `Δ^{φ+tψ}F` (cross-check of the closed form).
pub fn d_laplacian_fd(phi: &KahlerPotential, psi: &ScalarField, f: &ScalarField, h: f64) -> Result<ScalarField> {
    let mut err = None;
    let v = richardson_derivative_vec(
        |t| match build_geometry(&phi.perturbed(t, psi)).and_then(|g| differential_ops(&g).laplacian(f)) {
            Ok(l) => l.values,
            Err(e) => {
                err = Some(e);
                vec![f64::NAN; psi.spec.total()]
            }
        },
        h,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(ScalarField { spec: psi.spec, values: v }),
    }
}

/// `μ` via the geometry cache route (used to cross-check the pipeline).
pub fn mu_via_cache(phi: &KahlerPotential) -> Result<ScalarField> {
    Ok(moment_map_lc(&build_geometry(phi)?)?.mu)
}
