use super::diffeo::moser_flow;
use super::path::PotentialPath;
use super::pullback::{pullback_endomorphism, pullback_scalar};
use crate::acs_space::{lc, CompatibleACS};
use crate::calabi_functional::mu_of;
use crate::connection_space::moment_map;
use crate::error::Result;
use crate::grid_core::{GridSpec, ScalarField};
use crate::kahler_geometry::build_geometry;

/// Compatibility tolerance for structures transported by a numerical flow.
pub const FLOW_COMPAT_TOL: f64 = 1e-5;

/// `μ(lc(J_t))` and `f_t^*μ^{φ(t)}(∇^{φ(t)})` with `J_t = f_t⁻¹.J`.
pub fn lemma_main_sides(
    path: &PotentialPath,
    spec: GridSpec,
    t: f64,
    steps: usize,
) -> Result<(ScalarField, ScalarField)> {
    let geom0 = build_geometry(&path.potential(spec, 0.0))?;
    let f = moser_flow(path, spec, t, steps)?;
    let jt = pullback_endomorphism(&CompatibleACS::standard(&geom0).j, &f)?;
    let jt = CompatibleACS::with_tolerance(jt, &geom0, FLOW_COMPAT_TOL)?;
    let pack = lc(&jt, &geom0)?.curvature_pack(&geom0);
    let lhs = moment_map(&pack, &geom0)?.mu;
    let rhs = pullback_scalar(&mu_of(&path.potential(spec, t))?, &f)?;
    Ok((lhs, rhs))
}

/// `sup|μ(lc(J_t)) − f_t^*μ^{φ(t)}(∇^{φ(t)})|`.
pub fn lemma_main_residual(path: &PotentialPath, spec: GridSpec, t: f64, steps: usize) -> Result<f64> {
    let (a, b) = lemma_main_sides(path, spec, t, steps)?;
    Ok(a.sub(&b).sup_norm())
}
