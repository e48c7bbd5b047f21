//! Kähler geometry of `ω_φ = ω + dd^cφ` on the torus: metric, Levi-Civita
//! connection, curvature, scalar operators, and curvature of arbitrary
//! symplectic connections.

mod cache;
mod curvature;
pub mod kernels;
mod ops;

pub use cache::{build_geometry, lower_last, GeometryCache, KahlerPotential, PotentialMode};
pub(crate) use cache::{check_positivity, min_eigenvalue, potential_jets};
pub use curvature::{
    connection_curvature, covariant_derivative, covariant_derivative_with, first_bianchi_residual,
    nabla_omega_residual, perturbed_curvature, second_bianchi_residual, torsion_residual, CurvaturePack,
};
pub(crate) use curvature::{curvature_from, spectral_dgamma};
pub(crate) use ops::first_second;
pub use ops::{closedness_residual, differential_ops, exterior_derivative, DifferentialOps};
