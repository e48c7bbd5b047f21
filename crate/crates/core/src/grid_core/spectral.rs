use super::field::{ComplexField, GridSpec, ScalarField, TensorField};
use crate::error::{KflowError, Result};
use crate::numerics::pairwise_mean;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Per-axis derivative counts, one entry per real axis.
pub type MultiIndex = Vec<usize>;

type PlanCache = Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>;

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry((len, inverse))
        .or_insert_with(|| {
            let mut p = FftPlanner::new();
            if inverse {
                p.plan_fft_inverse(len)
            } else {
                p.plan_fft_forward(len)
            }
        })
        .clone()
}

/// Unnormalized multidimensional DFT in place (inverse includes the 1/total factor).
pub(crate) fn fft_nd(spec: &GridSpec, data: &mut [Complex64], inverse: bool) {
    let np = spec.points_per_axis;
    let fft = plan(np, inverse);
    let total = spec.total();
    let mut buf = vec![Complex64::new(0.0, 0.0); total];
    for axis in 0..spec.dim() {
        let stride = spec.stride(axis);
        if stride == 1 {
            fft.process(data);
            continue;
        }
        let block = np * stride;
        let nblocks = total / block;
        // gather lines along `axis` into contiguous rows
        let mut row = 0;
        for b in 0..nblocks {
            for inner in 0..stride {
                let base = b * block + inner;
                for j in 0..np {
                    buf[row * np + j] = data[base + j * stride];
                }
                row += 1;
            }
        }
        fft.process(&mut buf);
        let mut row = 0;
        for b in 0..nblocks {
            for inner in 0..stride {
                let base = b * block + inner;
                for j in 0..np {
                    data[base + j * stride] = buf[row * np + j];
                }
                row += 1;
            }
        }
    }
    if inverse {
        let s = 1.0 / total as f64;
        data.iter_mut().for_each(|c| *c *= s);
    }
}

/// Signed wavenumber of DFT index `j`; the Nyquist index maps to `+N/2`.
#[inline]
pub(crate) fn wavenumber(j: usize, np: usize) -> i64 {
    if j <= np / 2 {
        j as i64
    } else {
        j as i64 - np as i64
    }
}

/// Multiplier of the order-`m` derivative at DFT index `j`.
///
/// Odd orders annihilate the Nyquist mode; even orders keep it, so the
/// result is the derivative of the real trigonometric interpolant.
pub(crate) fn axis_multiplier(j: usize, np: usize, m: usize) -> Complex64 {
    if m == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if 2 * j == np && m % 2 == 1 {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::new(0.0, 2.0 * PI * wavenumber(j, np) as f64).powu(m as u32)
}

/// Coefficients below this fraction of the largest one are roundoff and are
/// dropped by [`Spectrum::forward`]. Without it, sixth-order derivatives at
/// 64² amplify transform noise by `(2π·32)⁶` and lose seven digits.
pub const SPECTRAL_FLOOR: f64 = 1e-14;

/// Fourier coefficients of a real grid field.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub spec: GridSpec,
    pub coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn forward(spec: &GridSpec, values: &[f64]) -> Self {
        let mut coeffs: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_nd(spec, &mut coeffs, false);
        let cut = SPECTRAL_FLOOR * coeffs.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
        coeffs.iter_mut().filter(|c| c.norm() < cut).for_each(|c| *c = Complex64::new(0.0, 0.0));
        Spectrum { spec: *spec, coeffs }
    }

    /// Inverse transform after multiplying by a separable per-axis multiplier.
    pub fn inverse_separable(&self, per_axis: &[Vec<Complex64>]) -> Vec<f64> {
        let spec = &self.spec;
        let np = spec.points_per_axis;
        let dim = spec.dim();
        let mut data = self.coeffs.clone();
        for (idx, c) in data.iter_mut().enumerate() {
            let mut m = Complex64::new(1.0, 0.0);
            let mut rest = idx;
            for a in (0..dim).rev() {
                m *= per_axis[a][rest % np];
                rest /= np;
            }
            *c *= m;
        }
        fft_nd(spec, &mut data, true);
        data.into_iter().map(|c| c.re).collect()
    }

    /// Inverse transform after multiplying by a real symbol of the signed wavevector.
    pub fn apply_symbol<F: Fn(&[i64]) -> f64>(&self, symbol: F) -> Vec<f64> {
        let spec = &self.spec;
        let np = spec.points_per_axis;
        let dim = spec.dim();
        let mut data = self.coeffs.clone();
        let mut k = vec![0i64; dim];
        for (idx, c) in data.iter_mut().enumerate() {
            let mut rest = idx;
            for a in (0..dim).rev() {
                k[a] = wavenumber(rest % np, np);
                rest /= np;
            }
            *c *= symbol(&k);
        }
        fft_nd(spec, &mut data, true);
        data.into_iter().map(|c| c.re).collect()
    }

    /// Mixed partial derivative with per-axis counts `alpha`.
    pub fn derivative(&self, alpha: &[usize]) -> Vec<f64> {
        let np = self.spec.points_per_axis;
        let per_axis: Vec<Vec<Complex64>> =
            alpha.iter().map(|&m| (0..np).map(|j| axis_multiplier(j, np, m)).collect()).collect();
        self.inverse_separable(&per_axis)
    }
}

/// Several mixed partial derivatives of one field, sharing a forward transform.
pub fn derivatives_multi(spec: &GridSpec, values: &[f64], alphas: &[MultiIndex]) -> Vec<Vec<f64>> {
    let s = Spectrum::forward(spec, values);
    alphas.iter().map(|a| s.derivative(a)).collect()
}

pub(crate) fn unit_index(dim: usize, axis: usize, order: usize) -> MultiIndex {
    let mut a = vec![0; dim];
    a[axis] = order;
    a
}

/// `∂^order f / ∂x_axis^order`, exact on modes below Nyquist.
pub fn partial_derivative(f: &ScalarField, axis: usize, order: usize) -> Result<ScalarField> {
    let dim = f.spec.dim();
    if axis >= dim {
        return Err(KflowError::AxisOutOfRange { axis, dim });
    }
    if order < 1 {
        return Err(KflowError::InvalidOrder(order));
    }
    let s = Spectrum::forward(&f.spec, &f.values);
    Ok(ScalarField { spec: f.spec, values: s.derivative(&unit_index(dim, axis, order)) })
}

/// Componentwise partial derivative of a tensor field.
pub fn partial_derivative_tensor(t: &TensorField, axis: usize, order: usize) -> Result<TensorField> {
    let dim = t.spec.dim();
    if axis >= dim {
        return Err(KflowError::AxisOutOfRange { axis, dim });
    }
    if order < 1 {
        return Err(KflowError::InvalidOrder(order));
    }
    let alpha = unit_index(dim, axis, order);
    let mut out = t.clone();
    for c in 0..t.ncomp() {
        let d = Spectrum::forward(&t.spec, t.comp(c)).derivative(&alpha);
        out.comp_mut(c).copy_from_slice(&d);
    }
    Ok(out)
}

/// Componentwise partial derivative of a complex field.
pub fn partial_derivative_complex(f: &ComplexField, axis: usize, order: usize) -> Result<ComplexField> {
    let re = partial_derivative(&f.re(), axis, order)?;
    let im = partial_derivative(&f.im(), axis, order)?;
    Ok(ComplexField::from_parts(&re, &im))
}

/// All first partial derivatives.
pub fn gradient(f: &ScalarField) -> Vec<ScalarField> {
    let dim = f.spec.dim();
    let s = Spectrum::forward(&f.spec, &f.values);
    (0..dim).map(|a| ScalarField { spec: f.spec, values: s.derivative(&unit_index(dim, a, 1)) }).collect()
}

/// `∫ f · density` over the unit-volume torus (grid mean, pairwise reduction).
pub fn integrate(f: &ScalarField, density: &ScalarField) -> Result<f64> {
    if f.spec != density.spec {
        return Err(KflowError::GridMismatch);
    }
    if let Some((point, &value)) = density.values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(KflowError::NonPositiveDensity { point, value });
    }
    let prod: Vec<f64> = f.values.iter().zip(&density.values).map(|(a, b)| a * b).collect();
    Ok(pairwise_mean(&prod))
}

/// Relative mismatch between the grid L² norm and the Fourier L² norm.
pub fn parseval_defect(f: &ScalarField) -> f64 {
    let s = Spectrum::forward(&f.spec, &f.values);
    let total = f.spec.total() as f64;
    let grid: f64 = pairwise_mean(&f.values.iter().map(|v| v * v).collect::<Vec<_>>());
    let four: f64 = pairwise_mean(&s.coeffs.iter().map(|c| c.norm_sqr()).collect::<Vec<_>>()) / total;
    (grid - four).abs() / grid.max(1e-300)
}
