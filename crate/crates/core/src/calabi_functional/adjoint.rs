//! Discrete moment-map pipeline `φ ↦ μ^φ` split into linear spectral stages
//! and pointwise kernels, with its exact tangent-linear map and transpose.
//!
//! Stages: jets of `φ` (orders 2..4) → Ricci (pointwise) → first and second
//! spectral derivatives of Ricci → `μ̃` (pointwise) → mean removal against
//! the volume density. Pointwise Jacobians come from forward-mode duals.

use crate::error::Result;
use crate::grid_core::{GridSpec, MultiIndex, ScalarField, Spectrum};
use crate::kahler_geometry::kernels::{
    metric_jet, moment_point, point_geometry, pointwise, sym_pairs, Frame, JetLayout,
};
use crate::kahler_geometry::{check_positivity, potential_jets, KahlerPotential};
use crate::numerics::pairwise_sum;
use crate::scalar::{Dual, Real};

const CHUNK: usize = 16;

/// A pointwise map `R^{n_in} → R^{n_out}` written once over [`Real`].
pub(crate) trait PointFn: Sync {
    fn n_in(&self) -> usize;
    fn n_out(&self) -> usize;
    fn eval<T: Real>(&self, x: &[T]) -> Vec<T>;
}

/// Tangent-linear map: outputs' directional derivatives for input tangents.
pub(crate) fn jvp_points<K: PointFn>(k: &K, x: &[Vec<f64>], xdot: &[Vec<f64>], total: usize) -> Vec<Vec<f64>> {
    pointwise(total, k.n_out(), |p, out| {
        let xs: Vec<Dual<1>> = x.iter().zip(xdot).map(|(v, t)| Dual { v: v[p], d: [t[p]] }).collect();
        for (o, y) in out.iter_mut().zip(k.eval(&xs)) {
            *o = y.d[0];
        }
    })
}

/// Vector-Jacobian product at every point: `x̄_i = Σ_u ȳ_u ∂y_u/∂x_i`.
pub(crate) fn vjp_points<K: PointFn>(k: &K, x: &[Vec<f64>], ybar: &[Vec<f64>], total: usize) -> Vec<Vec<f64>> {
    let nin = k.n_in();
    pointwise(total, nin, |p, out| {
        let base: Vec<f64> = x.iter().map(|v| v[p]).collect();
        let yb: Vec<f64> = ybar.iter().map(|v| v[p]).collect();
        if yb.iter().all(|&v| v == 0.0) {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let mut start = 0;
        while start < nin {
            let xs: Vec<Dual<CHUNK>> = base
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let mut d = [0.0; CHUNK];
                    if i >= start && i < start + CHUNK {
                        d[i - start] = 1.0;
                    }
                    Dual { v, d }
                })
                .collect();
            let ys = k.eval(&xs);
            for i in start..(start + CHUNK).min(nin) {
                let mut s = 0.0;
                for (u, y) in ys.iter().enumerate() {
                    s += yb[u] * y.d[i - start];
                }
                out[i] = s;
            }
            start += CHUNK;
        }
    })
}

pub(crate) fn eval_points<K: PointFn>(k: &K, x: &[Vec<f64>], total: usize) -> Vec<Vec<f64>> {
    pointwise(total, k.n_out(), |p, out| {
        let xs: Vec<f64> = x.iter().map(|v| v[p]).collect();
        out.copy_from_slice(&k.eval(&xs));
    })
}

/// Jets → unique Ricci components.
pub(crate) struct RicciKernel<'a> {
    pub frame: &'a Frame,
    pub jl: &'a JetLayout,
    pub pairs: &'a [(usize, usize)],
}

impl PointFn for RicciKernel<'_> {
    fn n_in(&self) -> usize {
        self.jl.len()
    }
    fn n_out(&self) -> usize {
        self.pairs.len()
    }
    fn eval<T: Real>(&self, x: &[T]) -> Vec<T> {
        let pg = point_geometry(self.frame, self.jl, x);
        let d = self.frame.dim;
        self.pairs.iter().map(|&(a, b)| pg.ric[a * d + b]).collect()
    }
}

/// Jets → volume density `Pf(ω_φ)/Pf(ω)`.
pub(crate) struct VolumeKernel<'a> {
    pub frame: &'a Frame,
    pub jl: &'a JetLayout,
}

impl PointFn for VolumeKernel<'_> {
    fn n_in(&self) -> usize {
        self.jl.len()
    }
    fn n_out(&self) -> usize {
        1
    }
    fn eval<T: Real>(&self, x: &[T]) -> Vec<T> {
        let d = self.frame.dim;
        let (g, _, _) = metric_jet(self.frame, self.jl, x);
        let mut omega = vec![T::zero(); d * d];
        for a in 0..d {
            for b in 0..d {
                omega[a * d + b] = -g[a * d + self.frame.perm[b]].scale(self.frame.sign[b]);
            }
        }
        vec![crate::kahler_geometry::kernels::pfaffian(&omega, d)
            .scale(crate::kahler_geometry::kernels::pfaffian_std_sign(d / 2))]
    }
}

/// (jets, Ric, ∂Ric, ∂∂Ric) → `μ̃`.
pub(crate) struct MuKernel<'a> {
    pub frame: &'a Frame,
    pub jl: &'a JetLayout,
    pub pairs: &'a [(usize, usize)],
}

impl PointFn for MuKernel<'_> {
    fn n_in(&self) -> usize {
        let d = self.frame.dim;
        let np = self.pairs.len();
        self.jl.len() + np + d * np + np * np
    }
    fn n_out(&self) -> usize {
        1
    }
    fn eval<T: Real>(&self, x: &[T]) -> Vec<T> {
        let d = self.frame.dim;
        let np = self.pairs.len();
        let nj = self.jl.len();
        let pg = point_geometry(self.frame, self.jl, &x[..nj]);
        let ru = &x[nj..nj + np];
        let dru = &x[nj + np..nj + np + d * np];
        let ddru = &x[nj + np + d * np..];
        let mut ric = vec![T::zero(); d * d];
        let mut dric = vec![T::zero(); d * d * d];
        let mut ddric = vec![T::zero(); d * d * d * d];
        for (u, &(a, b)) in self.pairs.iter().enumerate() {
            ric[a * d + b] = ru[u];
            ric[b * d + a] = ru[u];
            for p in 0..d {
                let v = dru[p * np + u];
                dric[(p * d + a) * d + b] = v;
                dric[(p * d + b) * d + a] = v;
            }
            for (w, &(p, q)) in self.pairs.iter().enumerate() {
                let v = ddru[w * np + u];
                for (s, t) in [(p, q), (q, p)] {
                    ddric[((s * d + t) * d + a) * d + b] = v;
                    ddric[((s * d + t) * d + b) * d + a] = v;
                }
            }
        }
        let parts = moment_point(d, &pg.gamma, &pg.dgamma, &pg.rm, &ric, &dric, &ddric, &pg.lambda, &pg.omega, false);
        vec![parts.laplace_term + parts.p_expanded]
    }
}

/// Forward state of the discrete pipeline at one potential.
pub struct MuPipeline {
    pub spec: GridSpec,
    pub frame: Frame,
    pub jl: JetLayout,
    pub pairs: Vec<(usize, usize)>,
    pub jets: Vec<Vec<f64>>,
    pub ric: Vec<Vec<f64>>,
    pub dric: Vec<Vec<f64>>,
    pub ddric: Vec<Vec<f64>>,
    pub mu_tilde: Vec<f64>,
    pub vol: Vec<f64>,
    pub mu0: f64,
    /// Smallest metric eigenvalue over the grid.
    pub margin: f64,
}

fn d_alpha(d: usize, p: usize) -> MultiIndex {
    let mut a = vec![0; d];
    a[p] = 1;
    a
}

fn dd_alpha(d: usize, p: usize, q: usize) -> MultiIndex {
    let mut a = vec![0; d];
    a[p] += 1;
    a[q] += 1;
    a
}

/// `(−1)^{|α|}∂^α`, the transpose of `∂^α` on grid vectors.
fn derivative_transpose(spec: &GridSpec, v: &[f64], alpha: &[usize]) -> Vec<f64> {
    let sign = if alpha.iter().sum::<usize>() % 2 == 0 { 1.0 } else { -1.0 };
    Spectrum::forward(spec, v).derivative(alpha).into_iter().map(|x| sign * x).collect()
}

impl MuPipeline {
    pub fn new(phi: &KahlerPotential) -> Result<Self> {
        let spec = phi.spec();
        let d = spec.dim();
        let frame = Frame::standard(spec.n);
        let jl = JetLayout::new(d);
        let pairs = sym_pairs(d);
        let jets = potential_jets(phi.phi(), &jl);
        let margin = check_positivity(&spec, &frame, &jl, &jets)?;
        let total = spec.total();
        let ric = eval_points(&RicciKernel { frame: &frame, jl: &jl, pairs: &pairs }, &jets, total);
        let (dric, ddric) = Self::ricci_stage(&spec, &pairs, &ric);
        let mut inputs = jets.clone();
        inputs.extend(ric.iter().cloned());
        inputs.extend(dric.iter().cloned());
        inputs.extend(ddric.iter().cloned());
        let mu_tilde = eval_points(&MuKernel { frame: &frame, jl: &jl, pairs: &pairs }, &inputs, total).remove(0);
        let vol = eval_points(&VolumeKernel { frame: &frame, jl: &jl }, &jets, total).remove(0);
        let mu0 = crate::numerics::weighted_mean(&mu_tilde, &vol);
        Ok(MuPipeline { spec, frame, jl, pairs, jets, ric, dric, ddric, mu_tilde, vol, mu0, margin })
    }

    /// `∂_pRic_u` (index `p·np + u`) and `∂_p∂_qRic_u` (index `w·np + u`, `w` over pairs).
    fn ricci_stage(spec: &GridSpec, pairs: &[(usize, usize)], ric: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let d = spec.dim();
        let np = pairs.len();
        let mut dric = vec![Vec::new(); d * np];
        let mut ddric = vec![Vec::new(); np * np];
        for (u, r) in ric.iter().enumerate() {
            let s = Spectrum::forward(spec, r);
            for p in 0..d {
                dric[p * np + u] = s.derivative(&d_alpha(d, p));
            }
            for (w, &(p, q)) in pairs.iter().enumerate() {
                ddric[w * np + u] = s.derivative(&dd_alpha(d, p, q));
            }
        }
        (dric, ddric)
    }

    fn inputs(&self) -> Vec<Vec<f64>> {
        let mut inputs = self.jets.clone();
        inputs.extend(self.ric.iter().cloned());
        inputs.extend(self.dric.iter().cloned());
        inputs.extend(self.ddric.iter().cloned());
        inputs
    }

    pub fn mu(&self) -> Vec<f64> {
        self.mu_tilde.iter().map(|v| v - self.mu0).collect()
    }

    /// Exact linearization `ψ ↦ d/dt μ^{φ+tψ}` of the discrete pipeline.
    pub fn tangent(&self, psi: &ScalarField) -> Vec<f64> {
        let spec = &self.spec;
        let total = spec.total();
        let d = spec.dim();
        let np = self.pairs.len();
        let jets_dot = potential_jets(psi, &self.jl);
        let rk = RicciKernel { frame: &self.frame, jl: &self.jl, pairs: &self.pairs };
        let ric_dot = jvp_points(&rk, &self.jets, &jets_dot, total);
        let (dric_dot, ddric_dot) = Self::ricci_stage(spec, &self.pairs, &ric_dot);
        let mut xdot = jets_dot.clone();
        xdot.extend(ric_dot);
        xdot.extend(dric_dot);
        xdot.extend(ddric_dot);
        debug_assert_eq!(xdot.len(), self.jl.len() + np + d * np + np * np);
        let mk = MuKernel { frame: &self.frame, jl: &self.jl, pairs: &self.pairs };
        let mut_dot = jvp_points(&mk, &self.inputs(), &xdot, total).remove(0);
        let vk = VolumeKernel { frame: &self.frame, jl: &self.jl };
        let vol_dot = jvp_points(&vk, &self.jets, &jets_dot, total).remove(0);
        let m: Vec<f64> = (0..total).map(|p| mut_dot[p] * self.vol[p] + self.mu_tilde[p] * vol_dot[p]).collect();
        let mean_dot = pairwise_sum(&m) / total as f64;
        mut_dot.iter().map(|v| v - mean_dot).collect()
    }

    /// Transpose of [`MuPipeline::tangent`] in the Euclidean grid inner product.
    pub fn transpose(&self, w: &[f64]) -> Vec<f64> {
        let spec = &self.spec;
        let total = spec.total();
        let d = spec.dim();
        let np = self.pairs.len();
        let nj = self.jl.len();
        let sw = pairwise_sum(w) / total as f64;
        let mut_bar: Vec<f64> = (0..total).map(|p| w[p] - sw * self.vol[p]).collect();
        let vol_bar: Vec<f64> = (0..total).map(|p| -sw * self.mu_tilde[p]).collect();

        let mk = MuKernel { frame: &self.frame, jl: &self.jl, pairs: &self.pairs };
        let xbar = vjp_points(&mk, &self.inputs(), &[mut_bar], total);
        let mut jets_bar: Vec<Vec<f64>> = xbar[..nj].to_vec();
        let mut ric_bar: Vec<Vec<f64>> = xbar[nj..nj + np].to_vec();
        let dric_bar = &xbar[nj + np..nj + np + d * np];
        let ddric_bar = &xbar[nj + np + d * np..];
        for u in 0..np {
            for p in 0..d {
                let t = derivative_transpose(spec, &dric_bar[p * np + u], &d_alpha(d, p));
                ric_bar[u].iter_mut().zip(t).for_each(|(a, b)| *a += b);
            }
            for (wi, &(p, q)) in self.pairs.iter().enumerate() {
                let t = derivative_transpose(spec, &ddric_bar[wi * np + u], &dd_alpha(d, p, q));
                ric_bar[u].iter_mut().zip(t).for_each(|(a, b)| *a += b);
            }
        }
        let vk = VolumeKernel { frame: &self.frame, jl: &self.jl };
        let vb = vjp_points(&vk, &self.jets, &[vol_bar], total);
        let rk = RicciKernel { frame: &self.frame, jl: &self.jl, pairs: &self.pairs };
        let rb = vjp_points(&rk, &self.jets, &ric_bar, total);
        for s in 0..nj {
            for p in 0..total {
                jets_bar[s][p] += vb[s][p] + rb[s][p];
            }
        }
        let mut out = vec![0.0; total];
        for s in 0..nj {
            let t = derivative_transpose(spec, &jets_bar[s], &self.jl.alphas[s]);
            out.iter_mut().zip(t).for_each(|(a, b)| *a += b);
        }
        out
    }
}
