use super::adjoint::MuPipeline;
use super::functional::grad_with;
use crate::error::{KflowError, Result};
use crate::grid_core::{ScalarField, Spectrum};
use crate::kahler_geometry::KahlerPotential;
use crate::numerics::{sup_norm, weighted_mean};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Spectral preconditioner applied to the gradient covector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    /// Plain `L²(ω_φ)` gradient.
    None,
    /// Division by `½λ³ + ε`, `λ = 4π²|k|²` (the flat symbol of `D`).
    FlatD,
    /// Division by `½λ⁶ + ε`, the flat symbol of the Hessian `2D*D`.
    FlatInverseHessian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub initial_step: f64,
    /// Step multiplier on rejection, in (0, 1).
    pub backtrack: f64,
    /// Armijo sufficient-decrease constant, in (0, 1).
    pub armijo: f64,
    /// Stop once `𝓕 ≤ f_tol_rel · 𝓕₀`.
    pub f_tol_rel: f64,
    /// Stop once `𝓕 ≤ f_tol_abs`.
    pub f_tol_abs: f64,
    /// Stop once `‖grad 𝓕‖∞ ≤ grad_tol`.
    pub grad_tol: f64,
    /// Line search gives up below this step.
    pub min_step: f64,
    pub preconditioner: Preconditioner,
    /// Regularization added to the preconditioner symbol.
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iters: 200,
            initial_step: 1.0,
            backtrack: 0.5,
            armijo: 1e-4,
            f_tol_rel: 1e-16,
            f_tol_abs: 1e-14,
            grad_tol: 0.0,
            min_step: 1e-14,
            preconditioner: Preconditioner::None,
            epsilon: 1e-12,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.initial_step, self.min_step, self.epsilon];
        if pos.iter().any(|v| !(*v > 0.0)) {
            return Err(KflowError::Format("optimizer: steps and epsilon must be positive".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) || !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(KflowError::Format("optimizer: backtrack and armijo must lie in (0,1)".into()));
        }
        if !(self.f_tol_rel >= 0.0 && self.f_tol_abs >= 0.0 && self.grad_tol >= 0.0) {
            return Err(KflowError::Format("optimizer: tolerances must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub f: f64,
    pub mu_inf: f64,
    pub grad_inf: f64,
    /// Accepted step length (0 for the initial record).
    pub step: f64,
    pub positivity_margin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    FunctionalTolerance,
    GradientTolerance,
    IterationCap,
    LineSearchFailure,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DescentReport {
    pub history: Vec<IterationRecord>,
    pub stop: StopReason,
    pub iterations: usize,
    pub f_initial: f64,
    pub f_final: f64,
    pub mu_inf_final: f64,
    pub phi_inf_final: f64,
    /// Message from a failed line search, if any.
    pub line_search_error: Option<String>,
    #[serde(skip)]
    pub phi: Option<KahlerPotential>,
}

impl DescentReport {
    /// Accepted steps strictly decrease 𝓕.
    pub fn is_monotone(&self) -> bool {
        self.history.windows(2).all(|w| w[1].f < w[0].f)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,F,mu_inf,step\n");
        for r in &self.history {
            s.push_str(&format!("{},{:e},{:e},{:e}\n", r.iter, r.f, r.mu_inf, r.step));
        }
        s
    }
}

struct State {
    phi: KahlerPotential,
    pipe: MuPipeline,
    f: f64,
}

impl State {
    fn new(phi: KahlerPotential) -> Result<Self> {
        let pipe = MuPipeline::new(&phi)?;
        let mu = pipe.mu();
        let sq: Vec<f64> = mu.iter().map(|v| v * v).collect();
        let f = weighted_mean(&sq, &pipe.vol);
        Ok(State { phi, pipe, f })
    }
}

fn precondition(cfg: &OptimizerConfig, covector: &ScalarField) -> ScalarField {
    let spec = covector.spec;
    let power = match cfg.preconditioner {
        Preconditioner::None => return covector.clone(),
        Preconditioner::FlatD => 3,
        Preconditioner::FlatInverseHessian => 6,
    };
    let eps = cfg.epsilon;
    let values = Spectrum::forward(&spec, &covector.values).apply_symbol(|k| {
        let k2: i64 = k.iter().map(|v| v * v).sum();
        if k2 == 0 {
            return 0.0;
        }
        let lam = 4.0 * PI * PI * k2 as f64;
        1.0 / (0.5 * lam.powi(power) + eps)
    });
    ScalarField { spec, values }
}

/// Gradient descent on `𝓕` with Armijo backtracking and mean-zero projection.
pub fn optimize(phi0: &KahlerPotential, cfg: &OptimizerConfig) -> Result<DescentReport> {
    cfg.validate()?;
    let mut st = State::new(phi0.clone())?;
    let f0 = st.f;
    let mut history = Vec::new();
    let mut step = cfg.initial_step;
    let mut line_search_error = None;
    let mut stop = StopReason::IterationCap;
    let mut iter = 0;
    loop {
        let grad = grad_with(&st.phi, &st.pipe)?;
        let mu_inf = sup_norm(&st.pipe.mu());
        history.push(IterationRecord {
            iter,
            f: st.f,
            mu_inf,
            grad_inf: grad.sup_norm(),
            step: if iter == 0 { 0.0 } else { step },
            positivity_margin: st.pipe.margin,
        });
        if st.f <= cfg.f_tol_abs || st.f <= cfg.f_tol_rel * f0 {
            stop = StopReason::FunctionalTolerance;
            break;
        }
        if grad.sup_norm() <= cfg.grad_tol {
            stop = StopReason::GradientTolerance;
            break;
        }
        if iter >= cfg.max_iters {
            break;
        }
        // the ω_φ-weighted gradient pairs with ψ through the density, so
        // precondition the covector W·grad
        let dir = if cfg.preconditioner == Preconditioner::None {
            grad.scale(-1.0)
        } else {
            let w: Vec<f64> = grad.values.iter().zip(&st.pipe.vol).map(|(g, w)| g * w).collect();
            precondition(cfg, &ScalarField { spec: grad.spec, values: w }).scale(-1.0)
        };
        let slope = weighted_mean(&grad.mul(&dir).values, &st.pipe.vol);
        if !(slope < 0.0) {
            stop = StopReason::GradientTolerance;
            break;
        }
        let mut trial = (step * 2.0).min(cfg.initial_step);
        let accepted = loop {
            if trial < cfg.min_step {
                break None;
            }
            // KahlerPotential::new projects onto mean zero
            match State::new(KahlerPotential::new(st.phi.phi().axpy(trial, &dir))) {
                Ok(next) if next.f <= st.f + cfg.armijo * trial * slope && next.f < st.f => break Some(next),
                _ => trial *= cfg.backtrack,
            }
        };
        match accepted {
            Some(next) => {
                st = next;
                step = trial;
                iter += 1;
            }
            None => {
                line_search_error =
                    Some(KflowError::StepRejected(format!("step underflow at iteration {iter}")).to_string());
                stop = StopReason::LineSearchFailure;
                break;
            }
        }
    }
    let mu_inf_final = history.last().map(|r| r.mu_inf).unwrap_or(0.0);
    Ok(DescentReport {
        stop,
        iterations: iter,
        f_initial: f0,
        f_final: st.f,
        mu_inf_final,
        phi_inf_final: st.phi.phi().sup_norm(),
        line_search_error,
        history,
        phi: Some(st.phi),
    })
}
