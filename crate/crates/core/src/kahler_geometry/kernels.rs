//! Pointwise tensor kernels shared by the geometry cache, the curvature of
//! general connections and the adjoint of the moment-map pipeline.
//!
//! Index conventions (all arrays row-major):
//! `gamma[d][a][b] = Γ^d_{ab}`, `dgamma[c][d][a][b] = ∂_c Γ^d_{ab}`,
//! `rm[a][b][c][d]` = component `d` of `R(∂_a,∂_b)∂_c`,
//! `ric[b][c] = Σ_a rm[a][b][c][a]`.

use crate::grid_core::MultiIndex;
use crate::scalar::Real;
use rayon::prelude::*;

/// The standard complex structure as a signed involution of the axes:
/// `J ∂_b = sign(b) ∂_{perm(b)}`, with `J ∂_{x^j} = ∂_{y^j}`.
#[derive(Clone, Debug)]
pub struct Frame {
    pub dim: usize,
    pub perm: Vec<usize>,
    pub sign: Vec<f64>,
}

impl Frame {
    pub fn standard(n: usize) -> Self {
        let dim = 2 * n;
        let perm = (0..dim).map(|a| if a < n { a + n } else { a - n }).collect();
        let sign = (0..dim).map(|a| if a < n { 1.0 } else { -1.0 }).collect();
        Frame { dim, perm, sign }
    }

    /// `J^a_b` as a dense matrix.
    pub fn j_matrix(&self) -> Vec<f64> {
        let d = self.dim;
        let mut m = vec![0.0; d * d];
        for b in 0..d {
            m[self.perm[b] * d + b] = self.sign[b];
        }
        m
    }

    /// The standard symplectic form `Σ dx^j ∧ dy^j`.
    pub fn omega_std(&self) -> Vec<f64> {
        let d = self.dim;
        let n = d / 2;
        let mut m = vec![0.0; d * d];
        for j in 0..n {
            m[j * d + j + n] = 1.0;
            m[(j + n) * d + j] = -1.0;
        }
        m
    }
}

/// Slot layout of the potential's partial derivatives of orders 2, 3 and 4,
/// one slot per sorted index tuple.
#[derive(Clone, Debug)]
pub struct JetLayout {
    pub dim: usize,
    pub alphas: Vec<MultiIndex>,
    idx2: Vec<usize>,
    idx3: Vec<usize>,
    idx4: Vec<usize>,
}

impl JetLayout {
    pub fn new(dim: usize) -> Self {
        let mut alphas = Vec::new();
        let lookup = |order: usize, alphas: &mut Vec<MultiIndex>| -> Vec<usize> {
            let count = dim.pow(order as u32);
            let mut table = vec![usize::MAX; count];
            for flat in 0..count {
                let mut rest = flat;
                let mut alpha = vec![0; dim];
                for _ in 0..order {
                    alpha[rest % dim] += 1;
                    rest /= dim;
                }
                let slot = match alphas.iter().position(|a| a == &alpha) {
                    Some(s) => s,
                    None => {
                        alphas.push(alpha);
                        alphas.len() - 1
                    }
                };
                table[flat] = slot;
            }
            table
        };
        let idx2 = lookup(2, &mut alphas);
        let idx3 = lookup(3, &mut alphas);
        let idx4 = lookup(4, &mut alphas);
        JetLayout { dim, alphas, idx2, idx3, idx4 }
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    #[inline]
    pub fn d2(&self, a: usize, b: usize) -> usize {
        self.idx2[a * self.dim + b]
    }
    #[inline]
    pub fn d3(&self, a: usize, b: usize, c: usize) -> usize {
        self.idx3[(a * self.dim + b) * self.dim + c]
    }
    #[inline]
    pub fn d4(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        self.idx4[((a * self.dim + b) * self.dim + c) * self.dim + d]
    }
}

/// Unique components (a ≤ b) of a symmetric rank-2 tensor.
pub fn sym_pairs(dim: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for a in 0..dim {
        for b in a..dim {
            v.push((a, b));
        }
    }
    v
}

/// Metric `g = ω_φ(·,J·)` and its first and second partial derivatives
/// from the potential's jets: `g_ab = δ_ab + φ_ab + s_a s_b φ_{π(a)π(b)}`.
pub fn metric_jet<T: Real>(fr: &Frame, jl: &JetLayout, pd: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
    let d = fr.dim;
    let mut g = vec![T::zero(); d * d];
    let mut dg = vec![T::zero(); d * d * d];
    let mut ddg = vec![T::zero(); d * d * d * d];
    for a in 0..d {
        for b in 0..d {
            let (pa, pb) = (fr.perm[a], fr.perm[b]);
            let s = fr.sign[a] * fr.sign[b];
            let mut v = pd[jl.d2(a, b)] + pd[jl.d2(pa, pb)].scale(s);
            if a == b {
                v += T::one();
            }
            g[a * d + b] = v;
            for c in 0..d {
                dg[(c * d + a) * d + b] = pd[jl.d3(a, b, c)] + pd[jl.d3(pa, pb, c)].scale(s);
                for e in 0..d {
                    ddg[((c * d + e) * d + a) * d + b] = pd[jl.d4(a, b, c, e)] + pd[jl.d4(pa, pb, c, e)].scale(s);
                }
            }
        }
    }
    (g, dg, ddg)
}

/// Inverse of a small symmetric positive-definite matrix (Gauss-Jordan).
pub fn invert<T: Real>(m: &[T], d: usize) -> Vec<T> {
    let mut a = m.to_vec();
    let mut inv = vec![T::zero(); d * d];
    for i in 0..d {
        inv[i * d + i] = T::one();
    }
    for col in 0..d {
        let p = T::one() / a[col * d + col];
        for k in 0..d {
            a[col * d + k] *= p;
            inv[col * d + k] *= p;
        }
        for row in 0..d {
            if row == col {
                continue;
            }
            let f = a[row * d + col];
            if f.val() == 0.0 {
                continue;
            }
            for k in 0..d {
                let t = a[col * d + k];
                a[row * d + k] -= f * t;
                let t = inv[col * d + k];
                inv[row * d + k] -= f * t;
            }
        }
    }
    inv
}

/// Pfaffian of an antisymmetric 2×2 or 4×4 matrix in axis order.
pub fn pfaffian<T: Real>(w: &[T], d: usize) -> T {
    match d {
        2 => w[1],
        4 => w[1] * w[2 * 4 + 3] - w[2] * w[4 + 3] + w[3] * w[4 + 2],
        _ => panic!("pfaffian only implemented for dimension 2 and 4"),
    }
}

/// Sign of the Pfaffian of the standard form in axis order, `(-1)^{n(n-1)/2}`.
pub fn pfaffian_std_sign(n: usize) -> f64 {
    if (n * (n - 1) / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Christoffel symbols and their exact first derivatives from metric jets.
pub fn christoffel_from_metric<T: Real>(d: usize, ginv: &[T], dg: &[T], ddg: &[T]) -> (Vec<T>, Vec<T>) {
    // lowered Γ_{e,ab} and ∂_cΓ_{e,ab}
    let mut gl = vec![T::zero(); d * d * d];
    let mut dgl = vec![T::zero(); d * d * d * d];
    let dgi = |c: usize, a: usize, b: usize| (c * d + a) * d + b;
    let ddgi = |c: usize, e: usize, a: usize, b: usize| ((c * d + e) * d + a) * d + b;
    for e in 0..d {
        for a in 0..d {
            for b in a..d {
                let v = (dg[dgi(a, e, b)] + dg[dgi(b, e, a)] - dg[dgi(e, a, b)]).scale(0.5);
                gl[(e * d + a) * d + b] = v;
                gl[(e * d + b) * d + a] = v;
                for c in 0..d {
                    let w = (ddg[ddgi(c, a, e, b)] + ddg[ddgi(c, b, e, a)] - ddg[ddgi(c, e, a, b)]).scale(0.5);
                    dgl[((c * d + e) * d + a) * d + b] = w;
                    dgl[((c * d + e) * d + b) * d + a] = w;
                }
            }
        }
    }
    let mut gamma = vec![T::zero(); d * d * d];
    for dd in 0..d {
        for a in 0..d {
            for b in a..d {
                let mut s = T::zero();
                for e in 0..d {
                    s += ginv[dd * d + e] * gl[(e * d + a) * d + b];
                }
                gamma[(dd * d + a) * d + b] = s;
                gamma[(dd * d + b) * d + a] = s;
            }
        }
    }
    // ∂_cΓ^d_{ab} = g^{de}(∂_cΓ_{e,ab} − ∂_c g_{ef} Γ^f_{ab})
    let mut dgamma = vec![T::zero(); d * d * d * d];
    let mut tmp = vec![T::zero(); d];
    for c in 0..d {
        for a in 0..d {
            for b in a..d {
                for e in 0..d {
                    let mut s = dgl[((c * d + e) * d + a) * d + b];
                    for f in 0..d {
                        s -= dg[dgi(c, e, f)] * gamma[(f * d + a) * d + b];
                    }
                    tmp[e] = s;
                }
                for dd in 0..d {
                    let mut s = T::zero();
                    for e in 0..d {
                        s += ginv[dd * d + e] * tmp[e];
                    }
                    dgamma[((c * d + dd) * d + a) * d + b] = s;
                    dgamma[((c * d + dd) * d + b) * d + a] = s;
                }
            }
        }
    }
    (gamma, dgamma)
}

/// Riemann tensor `R(∂_a,∂_b)∂_c = rm[a][b][c][·]` from Γ and ∂Γ.
pub fn riemann<T: Real>(d: usize, gamma: &[T], dgamma: &[T]) -> Vec<T> {
    let gi = |x: usize, a: usize, b: usize| (x * d + a) * d + b;
    let dgi = |c: usize, x: usize, a: usize, b: usize| ((c * d + x) * d + a) * d + b;
    let mut rm = vec![T::zero(); d * d * d * d];
    for a in 0..d {
        for b in (a + 1)..d {
            for c in 0..d {
                for dd in 0..d {
                    let mut v = dgamma[dgi(a, dd, b, c)] - dgamma[dgi(b, dd, a, c)];
                    for e in 0..d {
                        v += gamma[gi(dd, a, e)] * gamma[gi(e, b, c)] - gamma[gi(dd, b, e)] * gamma[gi(e, a, c)];
                    }
                    rm[((a * d + b) * d + c) * d + dd] = v;
                    rm[((b * d + a) * d + c) * d + dd] = -v;
                }
            }
        }
    }
    rm
}

pub fn ricci<T: Real>(d: usize, rm: &[T]) -> Vec<T> {
    let mut ric = vec![T::zero(); d * d];
    for b in 0..d {
        for c in 0..d {
            let mut s = T::zero();
            for a in 0..d {
                s += rm[((a * d + b) * d + c) * d + a];
            }
            ric[b * d + c] = s;
        }
    }
    ric
}

/// Everything the geometry cache stores at one grid point.
pub struct PointGeometry<T> {
    pub g: Vec<T>,
    pub ginv: Vec<T>,
    pub omega: Vec<T>,
    pub lambda: Vec<T>,
    pub vol: T,
    pub gamma: Vec<T>,
    pub dgamma: Vec<T>,
    pub rm: Vec<T>,
    pub ric: Vec<T>,
    pub scal: T,
}

/// Geometry of `ω_φ` at one point from the potential's jets.
pub fn point_geometry<T: Real>(fr: &Frame, jl: &JetLayout, pd: &[T]) -> PointGeometry<T> {
    let d = fr.dim;
    let (g, dg, ddg) = metric_jet(fr, jl, pd);
    let ginv = invert(&g, d);
    // ω = −g J,  Λ = ω⁻¹ = J g⁻¹
    let mut omega = vec![T::zero(); d * d];
    let mut lambda = vec![T::zero(); d * d];
    for a in 0..d {
        for b in 0..d {
            omega[a * d + b] = -g[a * d + fr.perm[b]].scale(fr.sign[b]);
            let c = fr.perm[a];
            lambda[a * d + b] = ginv[c * d + b].scale(fr.sign[c]);
        }
    }
    let vol = pfaffian(&omega, d).scale(pfaffian_std_sign(d / 2));
    let (gamma, dgamma) = christoffel_from_metric(d, &ginv, &dg, &ddg);
    let rm = riemann(d, &gamma, &dgamma);
    let ric = ricci(d, &rm);
    let mut scal = T::zero();
    for b in 0..d {
        for c in 0..d {
            scal += ginv[b * d + c] * ric[b * d + c];
        }
    }
    PointGeometry { g, ginv, omega, lambda, vol, gamma, dgamma, rm, ric, scal }
}

/// Raise all indices of a rank-`r` covariant tensor with `Λ`
/// (`T^{p..} = Λ^{ap} T_{a..}` slot by slot).
pub fn raise_all<T: Real>(d: usize, t: &[T], rank: usize, lambda: &[T]) -> Vec<T> {
    let mut cur = t.to_vec();
    for slot in 0..rank {
        let inner = d.pow((rank - 1 - slot) as u32);
        let outer = d.pow(slot as u32);
        let mut next = vec![T::zero(); cur.len()];
        for o in 0..outer {
            for p in 0..d {
                for i in 0..inner {
                    let mut s = T::zero();
                    for a in 0..d {
                        let l = lambda[a * d + p];
                        if l.is_exact_zero() {
                            continue;
                        }
                        s += l * cur[(o * d + a) * inner + i];
                    }
                    next[(o * d + p) * inner + i] = s;
                }
            }
        }
        cur = next;
    }
    cur
}

/// Lowered curvature `R_{pqrs} = ω(R(∂_p,∂_q)∂_r, ∂_s)`.
pub fn riemann_lower<T: Real>(d: usize, rm: &[T], omega: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); d * d * d * d];
    for pqr in 0..d * d * d {
        for s in 0..d {
            let mut v = T::zero();
            for dd in 0..d {
                v += rm[pqr * d + dd] * omega[dd * d + s];
            }
            out[pqr * d + s] = v;
        }
    }
    out
}

/// Parts of the moment-map integrand at one point.
pub struct MomentParts<T> {
    pub laplace_term: T,
    pub p_expanded: T,
    pub p_wedge: Option<T>,
}

/// Moment-map integrand from connection data and Ricci derivatives.
///
/// `dric[p][a][b] = ∂_p Ric_ab`, `ddric[q][p][a][b] = ∂_q∂_p Ric_ab`.
#[allow(clippy::too_many_arguments)]
pub fn moment_point<T: Real>(
    d: usize,
    gamma: &[T],
    dgamma: &[T],
    rm: &[T],
    ric: &[T],
    dric: &[T],
    ddric: &[T],
    lambda: &[T],
    omega: &[T],
    with_wedge: bool,
) -> MomentParts<T> {
    let g3 = |x: usize, a: usize, b: usize| (x * d + a) * d + b;
    let g4 = |c: usize, x: usize, a: usize, b: usize| ((c * d + x) * d + a) * d + b;
    // ∇Ric[p][a][b]
    let mut nric = vec![T::zero(); d * d * d];
    for p in 0..d {
        for a in 0..d {
            for b in 0..d {
                let mut v = dric[g3(p, a, b)];
                for m in 0..d {
                    v -= gamma[g3(m, p, a)] * ric[m * d + b] + gamma[g3(m, p, b)] * ric[a * d + m];
                }
                nric[g3(p, a, b)] = v;
            }
        }
    }
    // ∇²Ric[q][p][a][b] contracted with Λ^{aq} Λ^{bp}
    let mut laplace_term = T::zero();
    for q in 0..d {
        for p in 0..d {
            for a in 0..d {
                let laq = lambda[a * d + q];
                for b in 0..d {
                    let w = laq * lambda[b * d + p];
                    if w.is_exact_zero() {
                        continue;
                    }
                    let mut v = ddric[g4(q, p, a, b)];
                    for m in 0..d {
                        v -= dgamma[g4(q, m, p, a)] * ric[m * d + b]
                            + gamma[g3(m, p, a)] * dric[g3(q, m, b)]
                            + dgamma[g4(q, m, p, b)] * ric[a * d + m]
                            + gamma[g3(m, p, b)] * dric[g3(q, a, m)];
                        v -= gamma[g3(m, q, p)] * nric[g3(m, a, b)]
                            + gamma[g3(m, q, a)] * nric[g3(p, m, b)]
                            + gamma[g3(m, q, b)] * nric[g3(p, a, m)];
                    }
                    laplace_term += w * v;
                }
            }
        }
    }
    // expanded P
    let ric_up = raise_all(d, ric, 2, lambda);
    let mut rr = T::zero();
    for i in 0..d * d {
        rr += ric[i] * ric_up[i];
    }
    let rl = riemann_lower(d, rm, omega);
    let rl_up = raise_all(d, &rl, 4, lambda);
    let mut qq = T::zero();
    for i in 0..rl.len() {
        qq += rl[i] * rl_up[i];
    }
    let p_expanded = rr.scale(-0.5) + qq.scale(0.25);
    let p_wedge = if with_wedge && d == 4 {
        let mut c_theta = T::zero();
        for (perm, sgn) in permutations4() {
            let (a, b, c, e) = (perm[0], perm[1], perm[2], perm[3]);
            let mut tr = T::zero();
            for x in 0..d {
                for y in 0..d {
                    tr += rm[g4(a, b, y, x)] * rm[g4(c, e, x, y)];
                }
            }
            c_theta += tr.scale(sgn);
        }
        let pf = pfaffian(omega, d);
        Some(c_theta.scale(0.125) / pf)
    } else {
        None
    };
    MomentParts { laplace_term, p_expanded, p_wedge }
}

/// The 24 permutations of (0,1,2,3) with their signs.
pub fn permutations4() -> Vec<([usize; 4], f64)> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for e in 0..4 {
                    let p = [a, b, c, e];
                    let mut seen = [false; 4];
                    if p.iter().any(|&x| std::mem::replace(&mut seen[x], true)) {
                        continue;
                    }
                    let mut inv = 0;
                    for i in 0..4 {
                        for j in (i + 1)..4 {
                            if p[i] > p[j] {
                                inv += 1;
                            }
                        }
                    }
                    out.push((p, if inv % 2 == 0 { 1.0 } else { -1.0 }));
                }
            }
        }
    }
    out
}

/// Evaluate `f` at every grid point in parallel and return component-major
/// outputs (`nout` components of length `total`).
pub fn pointwise<F>(total: usize, nout: usize, f: F) -> Vec<Vec<f64>>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    const CHUNK: usize = 64;
    let mut pm = vec![0.0; total * nout];
    pm.par_chunks_mut(CHUNK * nout).enumerate().for_each(|(ci, chunk)| {
        for (k, out) in chunk.chunks_mut(nout).enumerate() {
            f(ci * CHUNK + k, out);
        }
    });
    let mut cm = vec![vec![0.0; total]; nout];
    for p in 0..total {
        for c in 0..nout {
            cm[c][p] = pm[p * nout + c];
        }
    }
    cm
}

/// Gather the values of several component arrays at one point.
#[inline]
pub fn gather(fields: &[&[f64]], p: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend(fields.iter().map(|f| f[p]));
}
