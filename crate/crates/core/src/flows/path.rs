use crate::error::{KflowError, Result};
use crate::grid_core::{GridSpec, ScalarField};
use crate::kahler_geometry::kernels::{invert, Frame};
use crate::kahler_geometry::{build_geometry, KahlerPotential, PotentialMode};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Finite trigonometric sum `Σ amp·cos(2πk·x + phase)` evaluated exactly off-grid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    pub terms: Vec<PotentialMode>,
}

impl TrigPoly {
    pub fn new(terms: Vec<PotentialMode>) -> Self {
        TrigPoly { terms }
    }

    /// `∂^α` at `x`.
    pub fn derivative(&self, alpha: &[usize], x: &[f64]) -> f64 {
        let order: usize = alpha.iter().sum();
        let shift = order as f64 * 0.5 * PI;
        self.terms
            .iter()
            .map(|m| {
                let mut c = m.amplitude;
                let mut theta = m.phase + shift;
                for (a, &k) in m.mode.iter().enumerate() {
                    let w = 2.0 * PI * k as f64;
                    c *= w.powi(alpha[a] as i32);
                    theta += w * x[a];
                }
                c * theta.cos()
            })
            .sum()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|m| m.eval(x)).sum()
    }

    pub fn sample(&self, spec: GridSpec) -> ScalarField {
        ScalarField::from_fn(spec, |x| self.value(x))
    }

    pub fn scale(&self, c: f64) -> Self {
        TrigPoly {
            terms: self.terms.iter().map(|m| PotentialMode::new(m.mode.clone(), m.amplitude * c, m.phase)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|m| m.amplitude == 0.0)
    }
}

/// One basis function of a [`PotentialPath`] with a polynomial-in-`t` coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathTerm {
    pub mode: Vec<i64>,
    pub phase: f64,
    /// `c(t) = Σ_j coeffs[j]·t^j`.
    pub coeffs: Vec<f64>,
}

impl PathTerm {
    fn value(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    fn rate(&self, t: f64) -> f64 {
        self.coeffs.iter().enumerate().skip(1).rev().fold(0.0, |acc, (j, c)| acc * t + j as f64 * c)
    }
}

/// `t ↦ φ(t)` over a fixed low-mode basis with closed-form coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialPath {
    pub n: usize,
    pub terms: Vec<PathTerm>,
    pub t_min: f64,
    pub t_max: f64,
}

impl PotentialPath {
    pub fn new(n: usize, terms: Vec<PathTerm>, t_min: f64, t_max: f64) -> Result<Self> {
        if !(t_min <= 0.0 && t_max >= 0.0 && t_min < t_max) {
            return Err(KflowError::InvalidGrid(format!("path domain [{t_min}, {t_max}] must contain 0")));
        }
        for term in &terms {
            if term.mode.len() != 2 * n || term.mode.iter().all(|&k| k == 0) {
                return Err(KflowError::InvalidGrid(format!(
                    "path mode {:?} is constant or has the wrong length",
                    term.mode
                )));
            }
        }
        Ok(PotentialPath { n, terms, t_min, t_max })
    }

    /// `φ(t) = base + t·direction` on `[t_min, t_max]`.
    pub fn affine(
        n: usize,
        base: &[PotentialMode],
        direction: &[PotentialMode],
        t_min: f64,
        t_max: f64,
    ) -> Result<Self> {
        let mut terms: Vec<PathTerm> =
            base.iter().map(|m| PathTerm { mode: m.mode.clone(), phase: m.phase, coeffs: vec![m.amplitude] }).collect();
        terms.extend(direction.iter().map(|m| PathTerm {
            mode: m.mode.clone(),
            phase: m.phase,
            coeffs: vec![0.0, m.amplitude],
        }));
        Self::new(n, terms, t_min, t_max)
    }

    pub fn phi(&self, t: f64) -> TrigPoly {
        TrigPoly::new(self.terms.iter().map(|p| PotentialMode::new(p.mode.clone(), p.value(t), p.phase)).collect())
    }

    pub fn phi_dot(&self, t: f64) -> TrigPoly {
        TrigPoly::new(self.terms.iter().map(|p| PotentialMode::new(p.mode.clone(), p.rate(t), p.phase)).collect())
    }

    pub fn potential(&self, spec: GridSpec, t: f64) -> KahlerPotential {
        KahlerPotential::new(self.phi(t).sample(spec))
    }

    /// Smallest metric eigenvalue over `samples + 1` equally spaced times.
    pub fn check_positivity(&self, spec: GridSpec, samples: usize) -> Result<f64> {
        let mut worst = f64::INFINITY;
        for i in 0..=samples.max(1) {
            let t = self.t_min + (self.t_max - self.t_min) * i as f64 / samples.max(1) as f64;
            worst = worst.min(build_geometry(&self.potential(spec, t))?.positivity_margin);
        }
        Ok(worst)
    }
}

/// Index helper for the `d×d×d` third-derivative cube.
fn ji(d: usize, a: usize, b: usize, c: usize) -> Vec<usize> {
    let mut al = vec![0; d];
    al[a] += 1;
    al[b] += 1;
    al[c] += 1;
    al
}

/// `g_φ` and `∂_cg_φ` at an off-grid point, `dg[c][a][b]`.
pub(crate) fn metric_at(fr: &Frame, phi: &TrigPoly, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = fr.dim;
    let mut g = vec![0.0; d * d];
    let mut dg = vec![0.0; d * d * d];
    let second = |a: usize, b: usize| {
        let mut al = vec![0; d];
        al[a] += 1;
        al[b] += 1;
        phi.derivative(&al, x)
    };
    for a in 0..d {
        for b in a..d {
            let (pa, pb) = (fr.perm[a], fr.perm[b]);
            let s = fr.sign[a] * fr.sign[b];
            let mut v = second(a, b) + s * second(pa, pb);
            if a == b {
                v += 1.0;
            }
            g[a * d + b] = v;
            g[b * d + a] = v;
            for c in 0..d {
                let w = phi.derivative(&ji(d, a, b, c), x) + s * phi.derivative(&ji(d, pa, pb, c), x);
                dg[(c * d + a) * d + b] = w;
                dg[(c * d + b) * d + a] = w;
            }
        }
    }
    (g, dg)
}

/// A velocity field and its spatial Jacobian `DX[a][c] = ∂_cX^a` at `(t, x)`.
pub(crate) trait VelocityField: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, x: &[f64]) -> (Vec<f64>, Vec<f64>);
}

/// Moser field `X_t = −grad^{φ(t)} φ̇(t)`.
pub(crate) struct MoserField<'a> {
    pub frame: Frame,
    pub path: &'a PotentialPath,
}

impl VelocityField for MoserField<'_> {
    fn dim(&self) -> usize {
        self.frame.dim
    }

    fn eval(&self, t: f64, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.frame.dim;
        let phi = self.path.phi(t);
        let rate = self.path.phi_dot(t);
        let (g, dg) = metric_at(&self.frame, &phi, x);
        let gi = invert(&g, d);
        let mut df = vec![0.0; d];
        let mut ddf = vec![0.0; d * d];
        for a in 0..d {
            let mut al = vec![0; d];
            al[a] = 1;
            df[a] = rate.derivative(&al, x);
            for c in 0..d {
                let mut al2 = al.clone();
                al2[c] += 1;
                ddf[a * d + c] = rate.derivative(&al2, x);
            }
        }
        let mut v = vec![0.0; d];
        let mut dv = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                v[a] -= gi[a * d + b] * df[b];
            }
        }
        // ∂_cX^a = g^{ae}(∂_cg_{eb})g^{bf}∂_fφ̇ − g^{ab}∂_c∂_bφ̇ = −g^{ae}(∂_cg_{eb})X^b − g^{ab}∂_c∂_bφ̇
        for a in 0..d {
            for c in 0..d {
                let mut s = 0.0;
                for e in 0..d {
                    for b in 0..d {
                        s -= gi[a * d + e] * dg[(c * d + e) * d + b] * v[b];
                    }
                }
                for b in 0..d {
                    s -= gi[a * d + b] * ddf[b * d + c];
                }
                dv[a * d + c] = s;
            }
        }
        (v, dv)
    }
}

/// Hamiltonian field of `F` for `ω_φ`: `i(X_F)ω_φ = dF`, i.e. `X^a = Λ^{ba}∂_bF`.
pub(crate) struct HamiltonianField<'a> {
    pub frame: Frame,
    pub phi: &'a TrigPoly,
    pub f: &'a TrigPoly,
}

impl VelocityField for HamiltonianField<'_> {
    fn dim(&self) -> usize {
        self.frame.dim
    }

    fn eval(&self, _t: f64, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let fr = &self.frame;
        let d = fr.dim;
        let (g, dg) = metric_at(fr, self.phi, x);
        let gi = invert(&g, d);
        // Λ^{ab} = s_{π(a)} g^{π(a)b};  ∂_cg^{ij} = −g^{ie}(∂_cg_{ef})g^{fj}
        let dgi = |c: usize, i: usize, j: usize| {
            let mut s = 0.0;
            for e in 0..d {
                for f in 0..d {
                    s -= gi[i * d + e] * dg[(c * d + e) * d + f] * gi[f * d + j];
                }
            }
            s
        };
        let mut df = vec![0.0; d];
        let mut ddf = vec![0.0; d * d];
        for a in 0..d {
            let mut al = vec![0; d];
            al[a] = 1;
            df[a] = self.f.derivative(&al, x);
            for c in 0..d {
                let mut al2 = al.clone();
                al2[c] += 1;
                ddf[a * d + c] = self.f.derivative(&al2, x);
            }
        }
        let mut v = vec![0.0; d];
        let mut dv = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                let pb = fr.perm[b];
                let lam = fr.sign[pb] * gi[pb * d + a];
                v[a] += lam * df[b];
                for c in 0..d {
                    dv[a * d + c] += fr.sign[pb] * dgi(c, pb, a) * df[b] + lam * ddf[b * d + c];
                }
            }
        }
        (v, dv)
    }
}
