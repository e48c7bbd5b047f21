use crate::error::{KflowError, Result};
use crate::grid_core::{GridSpec, ScalarField, Symmetry, TensorField, Variance};
use crate::kahler_geometry::kernels::{pointwise, raise_all};
use crate::kahler_geometry::GeometryCache;
use crate::numerics::pairwise_mean;
use rand::Rng;
use std::f64::consts::PI;

/// Fully symmetric covariant 3-tensor field `A_{ijk}`: a tangent vector to
/// the space of symplectic connections (`ω(A(X)Y,Z) = A(X,Y,Z)`).
#[derive(Clone, Debug, PartialEq)]
pub struct Sym3Tensor {
    pub t: TensorField,
}

fn all_perms3() -> Vec<Symmetry> {
    vec![Symmetry::symmetric(0, 1, 3), Symmetry::symmetric(1, 2, 3), Symmetry::symmetric(0, 2, 3)]
}

impl Sym3Tensor {
    /// Wraps a rank-3 covariant tensor, rejecting symmetry residuals above `1e-10`.
    pub fn new(t: TensorField) -> Result<Self> {
        Self::with_tolerance(t, 1e-10)
    }

    pub fn with_tolerance(mut t: TensorField, tol: f64) -> Result<Self> {
        if t.rank() != 3 {
            return Err(KflowError::InvalidGrid("a Sym3Tensor has rank 3".into()));
        }
        t.variance = vec![Variance::Co; 3];
        t.symmetries = all_perms3();
        let r = t.symmetry_residual();
        if r > tol {
            return Err(KflowError::SymmetryViolation { what: "symmetric 3-tensor".into(), residual: r });
        }
        Ok(Sym3Tensor { t })
    }

    /// Symmetrization over all six index permutations.
    pub fn symmetrize(t: &TensorField) -> Self {
        let d = t.spec.dim();
        let mut out = TensorField::covariant(t.spec, 3);
        let total = t.spec.total();
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let perms = [[i, j, k], [i, k, j], [j, i, k], [j, k, i], [k, i, j], [k, j, i]];
                    let mut acc = vec![0.0; total];
                    for p in perms {
                        let src = t.at(&p);
                        for q in 0..total {
                            acc[q] += src[q] / 6.0;
                        }
                    }
                    out.comp_mut((i * d + j) * d + k).copy_from_slice(&acc);
                }
            }
        }
        out.symmetries = all_perms3();
        Sym3Tensor { t: out }
    }

    pub fn zeros(spec: GridSpec) -> Self {
        let mut t = TensorField::covariant(spec, 3);
        t.symmetries = all_perms3();
        Sym3Tensor { t }
    }

    pub fn spec(&self) -> GridSpec {
        self.t.spec
    }

    /// Random low-mode symmetric tensor: every independent component is a
    /// sum of a few Fourier modes with `|k_a| ≤ max_mode` and random amplitudes.
    pub fn random_low_mode<R: Rng>(spec: GridSpec, max_mode: i64, amplitude: f64, rng: &mut R) -> Self {
        let d = spec.dim();
        let mut t = TensorField::covariant(spec, 3);
        for i in 0..d {
            for j in i..d {
                for k in j..d {
                    let f = random_low_mode_field(spec, max_mode, amplitude, 3, rng);
                    let mut idx = [i, j, k];
                    let perms = permutations_of(&mut idx);
                    for p in perms {
                        t.comp_mut((p[0] * d + p[1]) * d + p[2]).copy_from_slice(&f.values);
                    }
                }
            }
        }
        t.symmetries = all_perms3();
        Sym3Tensor { t }
    }

    /// One raised index: `Â^d_{bc} = A_{bcs}Λ^{sd}`, stored as `[d][b][c]`
    /// (the layout of connection coefficients).
    pub fn raise(&self, geom: &GeometryCache) -> TensorField {
        let d = geom.dim();
        let total = geom.spec.total();
        let mut out = TensorField::zeros(geom.spec, vec![Variance::Contra, Variance::Co, Variance::Co]);
        for dd in 0..d {
            for b in 0..d {
                for c in 0..d {
                    let mut acc = vec![0.0; total];
                    for s in 0..d {
                        let a = self.t.at(&[b, c, s]);
                        let l = geom.lambda.at(&[s, dd]);
                        for p in 0..total {
                            acc[p] += a[p] * l[p];
                        }
                    }
                    out.comp_mut((dd * d + b) * d + c).copy_from_slice(&acc);
                }
            }
        }
        out.symmetries = vec![Symmetry::symmetric(1, 2, 3)];
        out
    }

    /// Inverse of [`Sym3Tensor::raise`]: `A_{bcs} = Â^d_{bc} ω_{ds}`.
    pub fn lower_from(raised: &TensorField, geom: &GeometryCache, tol: f64) -> Result<Self> {
        let d = geom.dim();
        let total = geom.spec.total();
        let mut t = TensorField::covariant(geom.spec, 3);
        for b in 0..d {
            for c in 0..d {
                for s in 0..d {
                    let mut acc = vec![0.0; total];
                    for dd in 0..d {
                        let a = raised.at(&[dd, b, c]);
                        let w = geom.omega.at(&[dd, s]);
                        for p in 0..total {
                            acc[p] += a[p] * w[p];
                        }
                    }
                    t.comp_mut((b * d + c) * d + s).copy_from_slice(&acc);
                }
            }
        }
        Self::with_tolerance(t, tol)
    }

    pub fn scale(&self, c: f64) -> Self {
        Sym3Tensor { t: self.t.scale(c) }
    }

    pub fn add(&self, o: &Sym3Tensor) -> Self {
        let mut t = self.t.add(&o.t);
        t.symmetries = all_perms3();
        Sym3Tensor { t }
    }

    pub fn sup_norm(&self) -> f64 {
        self.t.sup_norm()
    }
}

fn permutations_of(idx: &mut [usize; 3]) -> Vec<[usize; 3]> {
    let [i, j, k] = *idx;
    vec![[i, j, k], [i, k, j], [j, i, k], [j, k, i], [k, i, j], [k, j, i]]
}

/// Random real field with `terms` Fourier modes, `|k_a| ≤ max_mode`, nonzero `k`.
pub fn random_low_mode_field<R: Rng>(
    spec: GridSpec,
    max_mode: i64,
    amplitude: f64,
    terms: usize,
    rng: &mut R,
) -> ScalarField {
    let d = spec.dim();
    let mut modes = Vec::new();
    while modes.len() < terms {
        let k: Vec<i64> = (0..d).map(|_| rng.random_range(-max_mode..=max_mode)).collect();
        if k.iter().all(|&x| x == 0) {
            continue;
        }
        let amp = amplitude * rng.random_range(-1.0..1.0);
        let phase = rng.random_range(0.0..2.0 * PI);
        modes.push((k, amp, phase));
    }
    ScalarField::from_fn(spec, |x| {
        modes
            .iter()
            .map(|(k, a, ph)| {
                let arg: f64 = k.iter().zip(x).map(|(&kk, &xx)| kk as f64 * xx).sum();
                a * (2.0 * PI * arg + ph).cos()
            })
            .sum()
    })
}

/// Triple-Λ contraction `Λ^{i₁j₁}Λ^{i₂j₂}Λ^{i₃j₃}A_{i₁i₂i₃}B_{j₁j₂j₃}` at every point.
pub fn triple_lambda_density(a: &Sym3Tensor, b: &Sym3Tensor, geom: &GeometryCache) -> Vec<f64> {
    let d = geom.dim();
    let d3 = d * d * d;
    let cm = pointwise(geom.spec.total(), 1, |p, out| {
        let lam: Vec<f64> = (0..d * d).map(|c| geom.lambda.comp(c)[p]).collect();
        let ap: Vec<f64> = (0..d3).map(|c| a.t.comp(c)[p]).collect();
        let up = raise_all(d, &ap, 3, &lam);
        let mut s = 0.0;
        for c in 0..d3 {
            s += up[c] * b.t.comp(c)[p];
        }
        out[0] = s;
    });
    cm.into_iter().next().unwrap()
}

/// `Ω^𝓔(A,B) = ∫ Λ^{i₁j₁}Λ^{i₂j₂}Λ^{i₃j₃}A_{i₁i₂i₃}B_{j₁j₂j₃} ω^n/n!`.
pub fn omega_e(a: &Sym3Tensor, b: &Sym3Tensor, geom: &GeometryCache) -> Result<f64> {
    if a.spec() != geom.spec || b.spec() != geom.spec {
        return Err(KflowError::GridMismatch);
    }
    let dens = triple_lambda_density(a, b, geom);
    Ok(crate::numerics::weighted_mean(&dens, &geom.volume.values))
}

/// Endomorphism-trace form `−∫ Λ^{kl} tr(A(e_k)B(e_l)) ω^n/n!`, with
/// `A(e_k)^d_y = A_{kys}Λ^{sd}`.
pub fn omega_e_trace(a: &Sym3Tensor, b: &Sym3Tensor, geom: &GeometryCache) -> Result<f64> {
    if a.spec() != geom.spec || b.spec() != geom.spec {
        return Err(KflowError::GridMismatch);
    }
    let d = geom.dim();
    let ar = a.raise(geom);
    let br = b.raise(geom);
    let total = geom.spec.total();
    let mut dens = vec![0.0; total];
    for p in 0..total {
        let mut s = 0.0;
        for k in 0..d {
            for l in 0..d {
                let lam = geom.lambda.at(&[k, l])[p];
                if lam == 0.0 {
                    continue;
                }
                let mut tr = 0.0;
                for y in 0..d {
                    for dd in 0..d {
                        tr += ar.at(&[dd, k, y])[p] * br.at(&[y, l, dd])[p];
                    }
                }
                s += lam * tr;
            }
        }
        dens[p] = -s;
    }
    Ok(pairwise_mean(&dens.iter().zip(&geom.volume.values).map(|(x, v)| x * v).collect::<Vec<_>>()))
}

/// `(J^𝓔A)_{bcs} = A_{efg}J^e_bJ^f_cJ^g_s`, i.e. `(J^𝓔A)(X)Y = −JA(JX)JY`.
pub fn je_apply(a: &Sym3Tensor, geom: &GeometryCache) -> Sym3Tensor {
    let d = geom.dim();
    let fr = &geom.frame;
    let mut t = TensorField::covariant(a.spec(), 3);
    for b in 0..d {
        for c in 0..d {
            for s in 0..d {
                let sign = fr.sign[b] * fr.sign[c] * fr.sign[s];
                let src = a.t.at(&[fr.perm[b], fr.perm[c], fr.perm[s]]);
                t.comp_mut((b * d + c) * d + s).iter_mut().zip(src).for_each(|(o, v)| *o = sign * v);
            }
        }
    }
    t.symmetries = all_perms3();
    Sym3Tensor { t }
}

/// `G^{J^𝓔}(A,B) = Ω^𝓔(A, J^𝓔B)`.
pub fn g_je(a: &Sym3Tensor, b: &Sym3Tensor, geom: &GeometryCache) -> Result<f64> {
    omega_e(a, &je_apply(b, geom), geom)
}
