//! Symplectic geometry of the space of symplectic connections: symmetric
//! 3-tensors, `Ω^𝓔`, `J^𝓔`, Hamiltonian fundamental fields and the
//! moment map on connections.

mod moment;
mod sym3;

pub use moment::{
    lie_derivative_connection, moment_identity_residual, moment_identity_sides, moment_map, moment_map_lc,
    relative_sup_diff, wedge_p, MomentMap,
};
pub use sym3::{g_je, je_apply, omega_e, omega_e_trace, random_low_mode_field, triple_lambda_density, Sym3Tensor};
