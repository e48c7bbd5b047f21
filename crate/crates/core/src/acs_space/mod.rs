//! The space of `ω`-compatible complex structures: tangent vectors, the
//! Kähler structure `(G^𝓙, I, Ω^𝓙)`, Lie derivatives of `J`, the
//! Levi-Civita map `lc` and its differential, and the Condition C pairing.

mod lc;
mod structure;

pub use lc::{
    anti_linear_residual, condition_c_pairing, lc, lc_star, lc_star_with_residual, moser_structure,
    nijenhuis_variation_defect, riemannian_scal, scal_moment_residual, scal_moment_sides, LcConnection,
    HERMITIAN_SCAL_RATIO, LC_STAR_TOL,
};
pub use structure::{
    g_j, i_apply, lie_derivative_j, nijenhuis_residual, omega_j, ACSVariation, CompatibleACS, INTEGRABLE_TOL,
};
