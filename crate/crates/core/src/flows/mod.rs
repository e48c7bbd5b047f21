//! Moser flows `f_t^*ω_{φ(t)} = ω`, Hamiltonian flows, and pullbacks of
//! functions, forms, endomorphisms and connections by sampled diffeomorphisms.

mod diffeo;
mod lemma;
mod path;
mod pullback;

pub use diffeo::{hamiltonian_flow, moser_flow, moser_residual, DiscreteDiffeo, MIN_STEPS, NEWTON_ITERS, NEWTON_TOL};
pub use lemma::{lemma_main_residual, lemma_main_sides, FLOW_COMPAT_TOL};
pub use path::{PathTerm, PotentialPath, TrigPoly};
pub use pullback::{pullback_connection, pullback_covariant, pullback_endomorphism, pullback_scalar};
