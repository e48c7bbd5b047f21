//! The functional `𝓕 = ∫μ²`, its linearization `D` and adjoint `D*`, and a
//! gradient-descent optimizer over Kähler potentials.

mod adjoint;
mod assemble;
mod functional;
mod optimize;

pub use adjoint::MuPipeline;
pub use assemble::{
    assemble_d, decode_matrix, encode_matrix, read_matrix, write_matrix, AssembledD, SpectrumReport, KERNEL_REL_TOL,
    MAX_ASSEMBLY_POINTS, MAX_MATRIX_ENTRIES,
};
pub use functional::{
    calabi, d_apply, d_apply_linearized, d_laplacian_fd, d_scal_fd, d_star_apply, df_pairing, functional_f, grad_f,
    mu_of, mu_via_cache, variation_formulas, VariationFormulas, H_REL,
};
pub use optimize::{optimize, DescentReport, IterationRecord, OptimizerConfig, Preconditioner, StopReason};
