//! Truncated star products and their trace densities: the order-3 Fedosov
//! product, the order-2 Wick-type product, the `νχ` variant and the moment
//! map on diffeomorphisms attached to a closed 2-form.

mod chi;
mod contract;
mod fedosov;
mod series;
mod trace;
mod wick;

pub use chi::{
    chi_commutator_defect, chi_commutator_defect_with, chi_product, chi_trace_density, chi_trace_density_with,
    donaldson_moment, donaldson_moment_sides, omega_diff, ClosedTwoForm, CHI_CLOSING_COEFF, CLOSED_TOL,
    DEFAULT_K_PRIME,
};
pub use fedosov::{
    fedosov_commutator, fedosov_product, fedosov_product_series, fedosov_product_with, fedosov_trace_density,
    s3_pairing, FEDOSOV_NU2_COEFF, FEDOSOV_ORDER,
};
pub use series::NuSeries;
pub use trace::{
    bracket_witness, equivariant_bridge, low_mode_functions, trace_defect, BridgeReport, StarProduct, TraceDefect,
};
pub use wick::{
    hermitian_scal, wick_commutator_sides, wick_poisson_constant, wick_product, wick_trace_defect, wick_trace_density,
    WICK_BRACKET_CONSTANT, WICK_COMMUTATOR_CONSTANT, WICK_ORDER,
};
