//! Numerical geometry on discretized Kähler tori: the moment map
//! on symplectic connections, the 𝓕 functional and its descent, and trace
//! diagnostics for truncated star products.

pub mod acs_space;
pub mod calabi_functional;
pub mod connection_space;
pub mod error;
pub mod flows;
pub mod grid_core;
pub mod kahler_geometry;
pub mod numerics;
pub mod scalar;
pub mod star_products;

pub use error::{KflowError, Result};
