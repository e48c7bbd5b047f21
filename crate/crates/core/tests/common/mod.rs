//! Fixtures shared by the module integration tests.
#![allow(dead_code)]

use kflow_core::connection_space::random_low_mode_field;
use kflow_core::grid_core::{GridSpec, ScalarField};
use kflow_core::kahler_geometry::{KahlerPotential, PotentialMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub const TAU: f64 = 2.0 * PI;
/// Potential amplitudes are quoted in units of `1/(4π²)`.
pub const S: f64 = 1.0 / (4.0 * PI * PI);

pub fn grid(n: usize, np: usize) -> GridSpec {
    GridSpec::new(n, np).unwrap()
}

pub fn curved_n1_modes() -> Vec<PotentialMode> {
    vec![PotentialMode::new(vec![1, 0], 0.05 * S, 0.0), PotentialMode::new(vec![1, 1], 0.03 * S, -PI / 2.0)]
}

pub fn curved_n1(np: usize) -> KahlerPotential {
    KahlerPotential::from_modes(grid(1, np), &curved_n1_modes())
}

pub fn curved_n2_modes() -> Vec<PotentialMode> {
    let a = 0.25 * S;
    vec![
        PotentialMode::new(vec![1, 0, 0, 0], 0.05 * a, 0.0),
        PotentialMode::new(vec![1, 1, 0, 0], 0.03 * a, -PI / 2.0),
        PotentialMode::new(vec![0, 1, 1, 0], 0.04 * a, 0.3),
        PotentialMode::new(vec![0, 0, 1, 1], 0.02 * a, 1.1),
    ]
}

pub fn curved_n2(np: usize) -> KahlerPotential {
    KahlerPotential::from_modes(grid(2, np), &curved_n2_modes())
}

pub fn flat(n: usize, np: usize) -> KahlerPotential {
    KahlerPotential::flat(grid(n, np))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two random fields with `|k_a| ≤ max_mode`.
pub fn seeded_pair(spec: GridSpec, seed: u64, max_mode: i64) -> (ScalarField, ScalarField) {
    let mut r = rng(seed);
    let f = random_low_mode_field(spec, max_mode, 1.0, 4, &mut r);
    let h = random_low_mode_field(spec, max_mode, 1.0, 4, &mut r);
    (f, h)
}

pub fn mode_field(spec: GridSpec, k: &[i64], phase: f64) -> ScalarField {
    ScalarField::from_fn(spec, |x| (TAU * k.iter().zip(x).map(|(k, x)| *k as f64 * x).sum::<f64>() + phase).cos())
}
