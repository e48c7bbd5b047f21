//! Periodic uniform grids on the torus, spectral calculus, quadrature,
//! trigonometric interpolation and the KFLD field file format.

mod field;
mod interp;
pub mod kfld;
mod spectral;

pub use field::{ComplexField, GridSpec, ScalarField, Symmetry, TensorField, Variance};
pub use interp::{interpolate, TrigInterpolant};
pub use spectral::{
    derivatives_multi, gradient, integrate, parseval_defect, partial_derivative, partial_derivative_complex,
    partial_derivative_tensor, MultiIndex, Spectrum, SPECTRAL_FLOOR,
};
