use super::field::{GridSpec, ScalarField};
use super::spectral::{fft_nd, wavenumber};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Trigonometric interpolant of one or more real fields sharing a grid.
///
/// The Nyquist mode of each axis is represented by `cos(πN x)`, so the
/// interpolant is real and reproduces the samples exactly at grid nodes.
/// Modes whose coefficients fall below `rel_cutoff` times the largest one
/// are dropped (0 keeps the full band).
#[derive(Clone, Debug)]
pub struct TrigInterpolant {
    spec: GridSpec,
    nfields: usize,
    mode_j: Vec<usize>,
    coeffs: Vec<Complex64>,
}

impl TrigInterpolant {
    pub fn new(spec: &GridSpec, fields: &[&[f64]], rel_cutoff: f64) -> Self {
        let total = spec.total();
        let dim = spec.dim();
        let np = spec.points_per_axis;
        let nf = fields.len();
        let spectra: Vec<Vec<Complex64>> = fields
            .iter()
            .map(|f| {
                let mut c: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v / total as f64, 0.0)).collect();
                fft_nd(spec, &mut c, false);
                c
            })
            .collect();
        let maxes: Vec<f64> = spectra.iter().map(|s| s.iter().fold(0.0_f64, |m, c| m.max(c.norm()))).collect();
        let mut mode_j = Vec::new();
        let mut coeffs = Vec::new();
        for idx in 0..total {
            let keep = (0..nf).any(|f| {
                let a = spectra[f][idx].norm();
                a > 0.0 && a >= rel_cutoff * maxes[f]
            });
            if !keep {
                continue;
            }
            let mut rest = idx;
            let mut js = vec![0; dim];
            for a in (0..dim).rev() {
                js[a] = rest % np;
                rest /= np;
            }
            mode_j.extend(js);
            coeffs.extend((0..nf).map(|f| spectra[f][idx]));
        }
        TrigInterpolant { spec: *spec, nfields: nf, mode_j, coeffs }
    }

    pub fn nfields(&self) -> usize {
        self.nfields
    }

    pub fn nmodes(&self) -> usize {
        self.coeffs.len() / self.nfields.max(1)
    }

    fn axis_basis(&self, x: f64) -> (Vec<Complex64>, Vec<Complex64>) {
        let np = self.spec.points_per_axis;
        let mut b = Vec::with_capacity(np);
        let mut db = Vec::with_capacity(np);
        for j in 0..np {
            if 2 * j == np {
                let arg = PI * np as f64 * x;
                b.push(Complex64::new(arg.cos(), 0.0));
                db.push(Complex64::new(-PI * np as f64 * arg.sin(), 0.0));
            } else {
                let k = wavenumber(j, np) as f64;
                let e = Complex64::from_polar(1.0, 2.0 * PI * k * x);
                b.push(e);
                db.push(e * Complex64::new(0.0, 2.0 * PI * k));
            }
        }
        (b, db)
    }

    /// Values of all fields at `x` (coordinates are wrapped mod 1).
    pub fn eval(&self, x: &[f64], vals: &mut [f64]) {
        let dim = self.spec.dim();
        let bases: Vec<Vec<Complex64>> = x.iter().map(|&xa| self.axis_basis(xa.rem_euclid(1.0)).0).collect();
        let nf = self.nfields;
        let mut acc = vec![Complex64::new(0.0, 0.0); nf];
        for m in 0..self.nmodes() {
            let js = &self.mode_j[m * dim..(m + 1) * dim];
            let mut p = Complex64::new(1.0, 0.0);
            for a in 0..dim {
                p *= bases[a][js[a]];
            }
            for f in 0..nf {
                acc[f] += self.coeffs[m * nf + f] * p;
            }
        }
        for f in 0..nf {
            vals[f] = acc[f].re;
        }
    }

    /// Values and gradients (`grads[f * dim + a]`) of all fields at `x`.
    pub fn eval_with_grad(&self, x: &[f64], vals: &mut [f64], grads: &mut [f64]) {
        let dim = self.spec.dim();
        let np = self.spec.points_per_axis;
        let bd: Vec<(Vec<Complex64>, Vec<Complex64>)> =
            x.iter().map(|&xa| self.axis_basis(xa.rem_euclid(1.0))).collect();
        let nf = self.nfields;
        let mut acc = vec![Complex64::new(0.0, 0.0); nf];
        let mut gacc = vec![Complex64::new(0.0, 0.0); nf * dim];
        let mut q = vec![Complex64::new(0.0, 0.0); dim];
        for m in 0..self.nmodes() {
            let js = &self.mode_j[m * dim..(m + 1) * dim];
            let mut p = Complex64::new(1.0, 0.0);
            let mut nyq = false;
            for a in 0..dim {
                p *= bd[a].0[js[a]];
                nyq |= 2 * js[a] == np;
            }
            if nyq {
                for a in 0..dim {
                    let mut pa = Complex64::new(1.0, 0.0);
                    for b in 0..dim {
                        pa *= if a == b { bd[b].1[js[b]] } else { bd[b].0[js[b]] };
                    }
                    q[a] = pa;
                }
            } else {
                for a in 0..dim {
                    q[a] = p * Complex64::new(0.0, 2.0 * PI * wavenumber(js[a], np) as f64);
                }
            }
            for f in 0..nf {
                let c = self.coeffs[m * nf + f];
                acc[f] += c * p;
                for a in 0..dim {
                    gacc[f * dim + a] += c * q[a];
                }
            }
        }
        for f in 0..nf {
            vals[f] = acc[f].re;
            for a in 0..dim {
                grads[f * dim + a] = gacc[f * dim + a].re;
            }
        }
    }
}

/// Full-band trigonometric interpolation of `f` at off-grid points.
pub fn interpolate(f: &ScalarField, points: &[Vec<f64>]) -> Vec<f64> {
    let it = TrigInterpolant::new(&f.spec, &[&f.values], 0.0);
    let mut v = [0.0];
    points
        .iter()
        .map(|p| {
            it.eval(p, &mut v);
            v[0]
        })
        .collect()
}
