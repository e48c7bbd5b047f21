use super::chi::{chi_pair, ClosedTwoForm};
use super::contract::check;
use super::fedosov::{fedosov_pair, FEDOSOV_NU2_COEFF};
use super::series::NuSeries;
use super::wick::wick_pair;
use crate::connection_space::{lie_derivative_connection, moment_map_lc, omega_e};
use crate::error::{KflowError, Result};
use crate::grid_core::ScalarField;
use crate::kahler_geometry::{differential_ops, GeometryCache};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// Which truncated product a trace defect refers to.
#[derive(Clone, Copy, Debug)]
pub enum StarProduct<'a> {
    /// Order-3 Fedosov product with vanishing curvature series.
    Fedosov,
    /// Order-2 Wick-type product of the standard complex structure.
    Wick,
    /// Order-2 Fedosov product with curvature series `νχ`.
    Chi { chi: &'a ClosedTwoForm, k_prime: f64 },
}

impl StarProduct<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            StarProduct::Fedosov => "fedosov",
            StarProduct::Wick => "wick",
            StarProduct::Chi { .. } => "chi",
        }
    }

    /// `(F*H, H*F)`.
    pub fn both_orders(&self, f: &ScalarField, h: &ScalarField, geom: &GeometryCache) -> Result<(NuSeries, NuSeries)> {
        match self {
            StarProduct::Fedosov => fedosov_pair(f, h, geom, FEDOSOV_NU2_COEFF),
            StarProduct::Wick => wick_pair(f, h, geom),
            StarProduct::Chi { chi, k_prime } => chi_pair(f, h, chi, geom, *k_prime),
        }
    }

    /// `[F,H]_* = F*H − H*F`.
    pub fn commutator(&self, f: &ScalarField, h: &ScalarField, geom: &GeometryCache) -> Result<NuSeries> {
        let (a, b) = self.both_orders(f, h, geom)?;
        a.sub(&b)
    }
}

/// Per-order coefficients of `∫[F,H]_*·ρ ω^n/n!`, index = power of `ν`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceDefect {
    pub coefficients: Vec<Complex64>,
}

impl TraceDefect {
    /// Largest `|coefficient|` over orders `1..=l`.
    pub fn max_through(&self, l: usize) -> f64 {
        self.coefficients.iter().take(l + 1).skip(1).map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Whether the density is a trace through order `l` at tolerance `tol`.
    pub fn closed_through(&self, l: usize, tol: f64) -> bool {
        self.max_through(l) <= tol
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }
}

/// Coefficients of `∫(F*H − H*F)ρ ω^n/n!`; the density must be truncated at
/// least as high as the product.
pub fn trace_defect(
    f: &ScalarField,
    h: &ScalarField,
    rho: &NuSeries,
    product: StarProduct,
    geom: &GeometryCache,
) -> Result<TraceDefect> {
    check(f, geom)?;
    check(h, geom)?;
    let comm = product.commutator(f, h, geom)?;
    if rho.order() < comm.order() {
        return Err(KflowError::NotApplicable(format!(
            "density truncated at order {} below the product order {}",
            rho.order(),
            comm.order()
        )));
    }
    let integrand = comm.mul(rho)?;
    Ok(TraceDefect { coefficients: integrand.integrate(&geom.volume)? })
}

/// Low-mode test functions `cos(2πk·x)` and `sin(2πk·x)` with `|k|∞ ≤ max_mode`
/// (one representative of each `±k` pair).
pub fn low_mode_functions(spec: crate::grid_core::GridSpec, max_mode: i64) -> Vec<(Vec<i64>, bool, ScalarField)> {
    let d = spec.dim();
    let m = 2 * max_mode + 1;
    let mut out = Vec::new();
    for code in 0..m.pow(d as u32) {
        let k: Vec<i64> = (0..d).map(|a| (code / m.pow(a as u32)) % m - max_mode).collect();
        // keep the lexicographically positive representative
        match k.iter().find(|&&v| v != 0) {
            Some(&v) if v > 0 => {}
            _ => continue,
        }
        for sine in [false, true] {
            let kk = k.clone();
            let f = ScalarField::from_fn(spec, move |x| {
                let th = 2.0 * PI * kk.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum::<f64>();
                if sine {
                    th.sin()
                } else {
                    th.cos()
                }
            });
            out.push((k.clone(), sine, f));
        }
    }
    out
}

/// Pair of low-mode functions maximizing `|∫{F,H}w ω^n/n!|`, returned with
/// that integral. Uses `∫{F,H}w = ∫F{H,w}`.
pub fn bracket_witness(
    geom: &GeometryCache,
    weight: &ScalarField,
    max_mode: i64,
) -> Result<(ScalarField, ScalarField, f64)> {
    check(weight, geom)?;
    let ops = differential_ops(geom);
    let fns = low_mode_functions(geom.spec, max_mode);
    let hw: Vec<ScalarField> = fns.iter().map(|(_, _, h)| ops.poisson(h, weight)).collect::<Result<_>>()?;
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..fns.len() {
        for j in 0..fns.len() {
            if i == j {
                continue;
            }
            let v = geom.inner(&fns[i].2, &hw[j])?;
            if best.is_none_or(|b| v.abs() > b.2.abs()) {
                best = Some((i, j, v));
            }
        }
    }
    let (i, j, v) = best.ok_or_else(|| KflowError::NotApplicable("no candidate pairs".into()))?;
    Ok((fns[i].2.clone(), fns[j].2.clone(), v))
}

/// The quantities entering the equivariant-moment bridge at order `ν³`.
#[derive(Clone, Debug, Serialize)]
pub struct BridgeReport {
    /// `ν³` trace-defect coefficient with `ρ = 1`.
    pub defect_plain: f64,
    /// `ν³` trace-defect coefficient with `ρ = 1 + (ν²/24)μ`.
    pub defect_corrected: f64,
    /// `Ω^𝓔(L_{X_F}∇, L_{X_H}∇)`.
    pub omega_e: f64,
    /// `∫{F,H}μ̃ ω^n/n!`.
    pub bracket_mu: f64,
    /// `(Ω^𝓔 + ∫{F,H}μ̃)/24`.
    pub predicted: f64,
}

/// Evaluate the `ν³` trace defects of the Fedosov product and the geometric
/// quantities they are expected to equal.
pub fn equivariant_bridge(f: &ScalarField, h: &ScalarField, geom: &GeometryCache) -> Result<BridgeReport> {
    let mm = moment_map_lc(geom)?;
    let plain = trace_defect(f, h, &NuSeries::one(geom.spec, 3), StarProduct::Fedosov, geom)?;
    let rho = super::fedosov::fedosov_trace_density(&mm.mu)?;
    let corrected = trace_defect(f, h, &rho, StarProduct::Fedosov, geom)?;
    let om = omega_e(&lie_derivative_connection(f, geom)?, &lie_derivative_connection(h, geom)?, geom)?;
    let bm = geom.inner(&differential_ops(geom).poisson(f, h)?, &mm.mu_tilde)?;
    Ok(BridgeReport {
        defect_plain: plain.coefficients[3].re,
        defect_corrected: corrected.coefficients[3].re,
        omega_e: om,
        bracket_mu: bm,
        predicted: (om + bm) / 24.0,
    })
}
