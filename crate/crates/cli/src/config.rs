//! Run configuration: one JSON document, echoed into every report.

use kflow_core::calabi_functional::OptimizerConfig;
use kflow_core::flows::TrigPoly;
use kflow_core::grid_core::{GridSpec, ScalarField};
use kflow_core::kahler_geometry::{KahlerPotential, PotentialMode};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// A configuration problem (exit code 2).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// One torus: grid and Kähler potential `Σ amplitude·cos(2πk·x + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case {
    #[serde(default)]
    pub label: Option<String>,
    pub n: usize,
    pub points_per_axis: usize,
    #[serde(default)]
    pub potential: Vec<PotentialMode>,
}

impl Case {
    pub fn spec(&self) -> Result<GridSpec, ConfigError> {
        GridSpec::new(self.n, self.points_per_axis).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn potential(&self) -> Result<KahlerPotential, ConfigError> {
        Ok(KahlerPotential::from_modes(self.spec()?, &self.potential))
    }

    pub fn is_flat(&self) -> bool {
        self.potential.iter().all(|m| m.amplitude == 0.0)
    }

    pub fn name(&self, index: usize) -> String {
        match &self.label {
            Some(l) => l.clone(),
            None if index == 0 => "primary".to_string(),
            None => format!("companion{index}"),
        }
    }

    fn validate(&self, what: &str) -> Result<(), ConfigError> {
        let spec = self.spec()?;
        if spec.points_per_axis % 2 != 0 || spec.points_per_axis < 8 {
            return Err(ConfigError(format!("{what}: points_per_axis must be even and at least 8")));
        }
        check_modes(&self.potential, spec, &format!("{what}.potential"))
    }
}

/// Modes must satisfy `|k_a| < N/8` (a quarter of the Nyquist index) on every axis.
pub fn check_modes(modes: &[PotentialMode], spec: GridSpec, what: &str) -> Result<(), ConfigError> {
    let limit = spec.points_per_axis as i64 / 8;
    for (i, m) in modes.iter().enumerate() {
        if m.mode.len() != spec.dim() {
            return Err(ConfigError(format!(
                "{what}[{i}]: mode has {} entries, expected {}",
                m.mode.len(),
                spec.dim()
            )));
        }
        if m.mode.iter().any(|&k| k.abs() * 8 >= spec.points_per_axis as i64) {
            return Err(ConfigError(format!(
                "{what}[{i}]: mode {:?} not below a quarter of Nyquist (|k| < {limit})",
                m.mode
            )));
        }
        if !m.amplitude.is_finite() || !m.phase.is_finite() {
            return Err(ConfigError(format!("{what}[{i}]: non-finite amplitude or phase")));
        }
    }
    Ok(())
}

pub fn sample_modes(modes: &[PotentialMode], spec: GridSpec) -> ScalarField {
    TrigPoly::new(modes.to_vec()).sample(spec)
}

/// Pass/fail thresholds, one per checked quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub flat: f64,
    /// Torsion and first Bianchi residuals.
    pub geometry: f64,
    pub nabla_omega: f64,
    pub second_bianchi: f64,
    pub closedness: f64,
    pub dim2_reduction: f64,
    pub p_consistency: f64,
    pub moment_identity: f64,
    pub d_symbol: f64,
    pub d_constant: f64,
    pub adjoint: f64,
    pub gradient: f64,
    pub fedosov: f64,
    pub fedosov_ratio: f64,
    pub bridge: f64,
    pub wick: f64,
    pub chi: f64,
    pub moser: f64,
    pub lemma: f64,
    pub condition_c: f64,
    pub optimizer_f_ratio: f64,
    pub optimizer_mu: f64,
    pub optimizer_phi: f64,
    pub kernel_min_eigenvalue: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            flat: 1e-10,
            geometry: 1e-8,
            nabla_omega: 1e-9,
            second_bianchi: 1e-7,
            closedness: 1e-10,
            dim2_reduction: 1e-7,
            p_consistency: 1e-8,
            moment_identity: 1e-6,
            d_symbol: 1e-8,
            d_constant: 1e-12,
            adjoint: 1e-7,
            gradient: 1e-5,
            fedosov: 1e-7,
            fedosov_ratio: 1e3,
            bridge: 1e-7,
            wick: 1e-7,
            chi: 1e-8,
            moser: 1e-6,
            lemma: 1e-5,
            condition_c: 1e-8,
            optimizer_f_ratio: 1e-10,
            optimizer_mu: 1e-6,
            optimizer_phi: 1e-5,
            kernel_min_eigenvalue: -1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoserOptions {
    /// `φ(t) = potential + t·direction`.
    pub direction: Vec<PotentialMode>,
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_times() -> Vec<f64> {
    vec![0.5, 1.0]
}

fn default_steps() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeomOptions {
    /// Seeded functions for the condition C sign check on the primary case (0 skips it).
    pub condition_c_seeds: usize,
    pub moser: Option<MoserOptions>,
}

impl Default for GeomOptions {
    fn default() -> Self {
        GeomOptions { condition_c_seeds: 0, moser: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentOptions {
    pub identity_pairs: usize,
    pub richardson_h: f64,
    /// Amplitude of the seeded symmetric 3-tensors `A`.
    pub perturbation_amplitude: f64,
}

impl Default for MomentOptions {
    fn default() -> Self {
        MomentOptions { identity_pairs: 5, richardson_h: 1e-4, perturbation_amplitude: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StarOptions {
    /// Largest mode searched for the bracket witness pair.
    pub witness_max_mode: i64,
    pub wick: bool,
    pub chi: bool,
    /// Amplitude of the seeded 1-form `α` in `χ = dα`.
    pub chi_exact_amplitude: f64,
    /// `c` in `χ = c·ω`.
    pub chi_omega_multiple: f64,
}

impl Default for StarOptions {
    fn default() -> Self {
        StarOptions { witness_max_mode: 1, wick: true, chi: true, chi_exact_amplitude: 0.3, chi_omega_multiple: 0.3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeOptions {
    /// Flat `D` symbol, adjoint, gradient and kernel rows before the descent.
    pub operator_checks: bool,
    pub kernel_points_per_axis: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions { operator_checks: true, kernel_points_per_axis: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub points_per_axis: usize,
    #[serde(default)]
    pub potential: Vec<PotentialMode>,
    /// Further tori run with the same options (not used by `optimize`).
    #[serde(default)]
    pub companions: Vec<Case>,
    /// Test functions as mode lists, consumed in pairs `(F, H)` by cases of
    /// matching dimension; seeded low-mode fields are used otherwise.
    #[serde(default)]
    pub test_functions: Vec<Vec<PotentialMode>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub geom: GeomOptions,
    #[serde(default)]
    pub moment: MomentOptions,
    #[serde(default)]
    pub star: StarOptions,
    #[serde(default)]
    pub optimize: OptimizeOptions,
    /// Write KFLD dumps of the main fields next to the report.
    #[serde(default)]
    pub dump_fields: bool,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn primary(&self) -> Case {
        Case { label: None, n: self.n, points_per_axis: self.points_per_axis, potential: self.potential.clone() }
    }

    /// The primary case followed by the companions.
    pub fn cases(&self) -> Vec<Case> {
        std::iter::once(self.primary()).chain(self.companions.iter().cloned()).collect()
    }

    /// `(F, H)` pairs from `test_functions` that live on `spec`.
    pub fn test_pairs(&self, spec: GridSpec) -> Vec<(ScalarField, ScalarField)> {
        self.test_functions
            .chunks_exact(2)
            .filter(|p| p.iter().all(|t| t.iter().all(|m| m.mode.len() == spec.dim())))
            .map(|p| (sample_modes(&p[0], spec), sample_modes(&p[1], spec)))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let primary = self.primary();
        primary.validate("config")?;
        for (i, c) in self.companions.iter().enumerate() {
            c.validate(&format!("companions[{i}]"))?;
        }
        for c in self.cases() {
            let spec = c.spec()?;
            for (i, t) in self.test_functions.iter().enumerate() {
                if t.iter().all(|m| m.mode.len() == spec.dim()) {
                    check_modes(t, spec, &format!("test_functions[{i}]"))?;
                }
            }
        }
        for (i, t) in self.test_functions.iter().enumerate() {
            if t.is_empty() || t.iter().any(|m| m.mode.len() != t[0].mode.len()) {
                return Err(ConfigError(format!("test_functions[{i}]: empty or mixed dimensions")));
            }
        }
        if self.test_functions.len() % 2 != 0 {
            return Err(ConfigError("test_functions must come in (F, H) pairs".into()));
        }
        self.optimizer.validate().map_err(|e| ConfigError(e.to_string()))?;
        if let Some(m) = &self.geom.moser {
            check_modes(&m.direction, primary.spec()?, "geom.moser.direction")?;
            if m.times.iter().any(|t| !(0.0..=1.0).contains(t)) {
                return Err(ConfigError("geom.moser.times must lie in [0, 1]".into()));
            }
        }
        if !(1e-6..=1e-2).contains(&self.moment.richardson_h) {
            return Err(ConfigError("moment.richardson_h must lie in [1e-6, 1e-2]".into()));
        }
        if self.star.witness_max_mode < 1 {
            return Err(ConfigError("star.witness_max_mode must be at least 1".into()));
        }
        Ok(())
    }
}
